import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tandem import (
    GrayImage,
    MetricsError,
    PgmFormatError,
    SsimParams,
    compute_report,
    load_pgm,
    mse,
    psnr,
    save_pgm,
    ssim,
)


def img(rows, levels=256):
    return GrayImage(np.array(rows, dtype=np.int64), levels=levels)


small_images = arrays(
    np.int64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
    elements=st.integers(0, 255),
)


# --- image container ---------------------------------------------------------


def test_gray_image_validation():
    with pytest.raises(MetricsError):
        img([[0, -1]])
    with pytest.raises(MetricsError):
        img([[0, 256]])
    with pytest.raises(MetricsError):
        GrayImage(np.zeros((2, 2), dtype=np.float64))
    with pytest.raises(MetricsError):
        GrayImage(np.zeros((0, 3), dtype=np.int64))
    with pytest.raises(MetricsError):
        GrayImage(np.zeros(4, dtype=np.int64))


def test_gray_image_is_defensive_copy():
    src = np.array([[1, 2], [3, 4]], dtype=np.int64)
    image = GrayImage(src)
    src[0, 0] = 9
    assert image.pixels[0, 0] == 1
    with pytest.raises(ValueError):
        image.pixels[0, 0] = 7  # read-only view


def test_shape_and_levels_must_match():
    with pytest.raises(MetricsError):
        mse(img([[0, 1]]), img([[0], [1]]))
    with pytest.raises(MetricsError):
        mse(img([[0, 1]]), img([[0, 1]], levels=1024))


# --- mse / psnr ---------------------------------------------------------------


def test_mse_known_value_exact():
    o = img([[0, 0], [0, 0]])
    g = img([[1, 2], [3, 4]])
    # (1 + 4 + 9 + 16) / 4
    assert mse(o, g) == 7.5


def test_mse_worst_case():
    o = img([[0]])
    g = img([[255]])
    assert mse(o, g) == 65025.0
    assert psnr(o, g) == 0.0


def test_psnr_infinite_iff_identical():
    a = img([[3, 141], [59, 26]])
    assert psnr(a, a) == math.inf
    b = img([[3, 141], [59, 27]])
    assert math.isfinite(psnr(a, b))


@settings(max_examples=60, deadline=None)
@given(small_images, st.data())
def test_psnr_mse_identity(px, data):
    o = GrayImage(px)
    g = GrayImage(data.draw(arrays(np.int64, px.shape,
                                   elements=st.integers(0, 255))))
    err = mse(o, g)
    if err == 0.0:
        assert psnr(o, g) == math.inf
    else:
        expect = 10.0 * math.log10(255.0 ** 2 / err)
        assert abs(psnr(o, g) - expect) <= 1e-9


def test_psnr_uses_level_count_not_255():
    o = img([[0]], levels=1024)
    g = img([[1023]], levels=1024)
    assert psnr(o, g) == 0.0


# --- ssim ----------------------------------------------------------------------


def test_ssim_identity_is_exactly_one():
    a = img([[0, 80], [160, 255]])
    assert ssim(a, a) == 1.0


def test_ssim_symmetry_exact():
    a = img([[12, 200, 3], [90, 41, 255]])
    b = img([[0, 190, 13], [80, 61, 245]])
    assert ssim(a, b) == ssim(b, a)


def test_ssim_constant_images_closed_form():
    o = img([[100] * 3] * 3)
    g = img([[120] * 3] * 3)
    c1 = (0.01 * 255) ** 2
    # zero variance cancels the contrast term
    assert ssim(o, g) == (2 * 100 * 120 + c1) / (100**2 + 120**2 + c1)


@settings(max_examples=60, deadline=None)
@given(small_images, st.data())
def test_ssim_bounded(px, data):
    o = GrayImage(px)
    g = GrayImage(data.draw(arrays(np.int64, px.shape,
                                   elements=st.integers(0, 255))))
    score = ssim(o, g)
    assert -1.0 <= score <= 1.0


def test_custom_stability_constants():
    a = img([[10, 20], [30, 40]])
    b = img([[12, 18], [33, 37]])
    default = ssim(a, b)
    loose = ssim(a, b, SsimParams(k1=0.05, k2=0.15))
    assert default != loose


def test_windowed_ssim_identity():
    a = img([[v * 16 for v in range(8)] for _ in range(8)])
    assert ssim(a, a, SsimParams(window=3)) == 1.0


def test_windowed_ssim_differs_from_global():
    rng = np.random.default_rng(5)
    o = GrayImage(rng.integers(0, 256, (12, 12), dtype=np.int64))
    g = GrayImage(rng.integers(0, 256, (12, 12), dtype=np.int64))
    w = ssim(o, g, SsimParams(window=4))
    assert -1.0 <= w <= 1.0
    assert w != ssim(o, g)


def test_window_larger_than_image_rejected():
    a = img([[1, 2], [3, 4]])
    with pytest.raises(MetricsError):
        ssim(a, a, SsimParams(window=3))
    with pytest.raises(MetricsError):
        SsimParams(window=0)


def test_report_json_keys():
    a = img([[0, 1], [2, 3]])
    doc = compute_report(a, a).to_json_dict()
    assert set(doc) == {"mse", "psnr_db", "ssim"}
    assert doc["mse"] == 0.0
    assert doc["ssim"] == 1.0
    assert doc["psnr_db"] == math.inf or doc["psnr_db"] is None


# --- pgm ------------------------------------------------------------------------


def test_pgm_one_by_one_ascii(tmp_path):
    p = tmp_path / "one.pgm"
    p.write_text("P2 1 1 255 7")
    image = load_pgm(p)
    assert image.pixels[0, 0] == 7
    assert image.levels == 256


def test_pgm_comments_ignored(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_text("P2 # format\n# a comment line\n2 2 # dims\n255\n0 1\n2 3\n")
    image = load_pgm(p)
    assert image.pixels.tolist() == [[0, 1], [2, 3]]


def test_pgm_binary_and_ascii_agree(tmp_path):
    rng = np.random.default_rng(11)
    image = GrayImage(rng.integers(0, 256, (5, 7), dtype=np.int64))
    pa, pb = tmp_path / "a.pgm", tmp_path / "b.pgm"
    save_pgm(image, pa, binary=False)
    save_pgm(image, pb, binary=True)
    ra, rb = load_pgm(pa), load_pgm(pb)
    assert np.array_equal(ra.pixels, image.pixels)
    assert np.array_equal(rb.pixels, image.pixels)
    assert ra.levels == rb.levels == 256


def test_pgm_sixteen_bit_round_trip(tmp_path):
    image = GrayImage(np.array([[0, 300], [65535, 1024]], dtype=np.int64),
                      levels=65536)
    p = tmp_path / "deep.pgm"
    save_pgm(image, p)
    back = load_pgm(p)
    assert np.array_equal(back.pixels, image.pixels)
    assert back.levels == 65536


def test_pgm_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_text("P6 1 1 255 0")
    with pytest.raises(PgmFormatError):
        load_pgm(p)


def test_pgm_rejects_truncated_binary(tmp_path):
    p = tmp_path / "short.pgm"
    p.write_bytes(b"P5\n2 2\n255\n\x00\x01\x02")
    with pytest.raises(PgmFormatError):
        load_pgm(p)


def test_pgm_rejects_missing_ascii_pixels(tmp_path):
    p = tmp_path / "short.pgm"
    p.write_text("P2 2 2 255 0 1 2")
    with pytest.raises(PgmFormatError):
        load_pgm(p)


def test_pgm_rejects_pixel_above_maxval(tmp_path):
    p = tmp_path / "over.pgm"
    p.write_text("P2 1 1 15 16")
    with pytest.raises(PgmFormatError):
        load_pgm(p)


def test_pgm_rejects_nonsense_maxval(tmp_path):
    p = tmp_path / "max.pgm"
    p.write_text("P2 1 1 0 0")
    with pytest.raises(PgmFormatError):
        load_pgm(p)
    p.write_text("P2 1 1 70000 0")
    with pytest.raises(PgmFormatError):
        load_pgm(p)


def test_pgm_maxval_sets_levels(tmp_path):
    p = tmp_path / "lo.pgm"
    p.write_text("P2 2 1 15 3 12")
    image = load_pgm(p)
    assert image.levels == 16
    # psnr peak follows the file's depth
    o = GrayImage(np.zeros((1, 1), dtype=np.int64), levels=16)
    g = GrayImage(np.full((1, 1), 15, dtype=np.int64), levels=16)
    assert psnr(o, g) == 0.0

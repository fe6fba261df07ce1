"""Grayscale image-quality metrics, plus a small PGM reader to feed them.

Pixel arithmetic is exact: images hold integers, squared-error sums are
integer sums, and only the final divisions leave the integers. That makes
the hand-checkable cases land exactly (a 2x2 error of {1, 4, 9, 16} is
7.5, not 7.4999...). PSNR is defined from MSE with peak L-1, infinite
precisely when the images are identical.

SSIM here is the global-statistics form: one mean, one population variance
(divisor m*n) and one covariance per image pair, no sliding window. Both
symmetry and ssim(x, x) == 1.0 hold exactly, not just approximately,
because both sides of the ratio are assembled from the same intermediate
floats. A windowed variant (uniform square window, mean of per-window
scores) is available through SsimParams.window, off by default.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MetricsError, PgmFormatError

DEFAULT_LEVELS = 256
MAX_PGM_MAXVAL = 65535


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Height-by-width integer pixel grid with L intensity levels."""

    pixels: np.ndarray
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise MetricsError(f"image must be a non-empty 2-D grid, got shape {px.shape}")
        if not np.issubdtype(px.dtype, np.integer):
            raise MetricsError(f"pixels must be integers, got dtype {px.dtype}")
        if not (isinstance(self.levels, int) and not isinstance(self.levels, bool)
                and self.levels >= 2):
            raise MetricsError(f"levels must be an integer >= 2, got {self.levels!r}")
        px = px.astype(np.int64)
        lo = int(px.min())
        hi = int(px.max())
        if lo < 0 or hi >= self.levels:
            raise MetricsError(
                f"pixel range [{lo}, {hi}] exceeds [0, {self.levels - 1}]"
            )
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _check_pair(o: GrayImage, g: GrayImage) -> None:
    if o.pixels.shape != g.pixels.shape:
        raise MetricsError(
            f"image dimensions differ: {o.pixels.shape} vs {g.pixels.shape}"
        )
    if o.levels != g.levels:
        raise MetricsError(f"intensity levels differ: {o.levels} vs {g.levels}")


def mse(o: GrayImage, g: GrayImage) -> float:
    """Mean squared pixel difference; the sum is exact integer arithmetic."""
    _check_pair(o, g)
    diff = o.pixels - g.pixels
    total = int(np.sum(diff * diff, dtype=np.int64))
    return total / o.pixels.size


def psnr(o: GrayImage, g: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB; +infinity for identical images."""
    _check_pair(o, g)
    err = mse(o, g)
    if err == 0:
        return math.inf
    peak = o.levels - 1
    return 10.0 * math.log10((peak * peak) / err)


@dataclass(frozen=True, slots=True)
class SsimParams:
    """Stabilization constants for SSIM, derived from k1/k2 and the level count.

    `window` switches on the windowed variant: scores over every wxw pixel
    block (stride 1), averaged. None means the single global window.
    """

    k1: float = 0.01
    k2: float = 0.03
    window: int | None = None

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0:
            raise MetricsError("k1 and k2 must be non-negative")
        if self.window is not None:
            if not isinstance(self.window, int) or self.window < 1:
                raise MetricsError(
                    f"window must be a positive integer, got {self.window!r}"
                )

    def c1(self, levels: int) -> float:
        return (self.k1 * (levels - 1)) ** 2

    def c2(self, levels: int) -> float:
        return (self.k2 * (levels - 1)) ** 2


def _ssim_from_stats(mu_o: float, mu_g: float, var_o: float, var_g: float,
                     cov: float, c1: float, c2: float) -> float:
    num = (2.0 * mu_o * mu_g + c1) * (2.0 * cov + c2)
    den = (mu_o * mu_o + mu_g * mu_g + c1) * (var_o + var_g + c2)
    value = num / den
    # guard against last-bit float drift; identical inputs are exactly 1
    return min(1.0, max(-1.0, value))


def ssim(o: GrayImage, g: GrayImage, params: SsimParams | None = None) -> float:
    """Structural similarity over image-wide statistics.

    Variances use the population divisor m*n. Covariance of an image with
    itself is computed by the same expression as its variance, which is
    what makes ssim(x, x) exactly 1.0 and ssim(o, g) == ssim(g, o) exact.
    """
    if params is None:
        params = SsimParams()
    _check_pair(o, g)
    if params.window is not None:
        return _windowed_ssim(o, g, params)
    n = o.pixels.size
    sum_o = int(np.sum(o.pixels, dtype=np.int64))
    sum_g = int(np.sum(g.pixels, dtype=np.int64))
    sum_oo = int(np.sum(o.pixels * o.pixels, dtype=np.int64))
    sum_gg = int(np.sum(g.pixels * g.pixels, dtype=np.int64))
    sum_og = int(np.sum(o.pixels * g.pixels, dtype=np.int64))
    mu_o = sum_o / n
    mu_g = sum_g / n
    var_o = sum_oo / n - mu_o * mu_o
    var_g = sum_gg / n - mu_g * mu_g
    cov = sum_og / n - mu_o * mu_g
    return _ssim_from_stats(mu_o, mu_g, var_o, var_g, cov,
                            params.c1(o.levels), params.c2(o.levels))


def _window_sums(px: np.ndarray, w: int) -> np.ndarray:
    # integral image; sums stay integers, so window statistics stay exact
    integral = np.zeros((px.shape[0] + 1, px.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(px, axis=0), axis=1, out=integral[1:, 1:])
    return (integral[w:, w:] - integral[:-w, w:]
            - integral[w:, :-w] + integral[:-w, :-w])


def _windowed_ssim(o: GrayImage, g: GrayImage, params: SsimParams) -> float:
    w = params.window
    if w > min(o.height, o.width):
        raise MetricsError(
            f"window {w} exceeds image size {o.height}x{o.width}"
        )
    n = w * w
    s_o = _window_sums(o.pixels, w) / n
    s_g = _window_sums(g.pixels, w) / n
    s_oo = _window_sums(o.pixels * o.pixels, w) / n
    s_gg = _window_sums(g.pixels * g.pixels, w) / n
    s_og = _window_sums(o.pixels * g.pixels, w) / n
    var_o = s_oo - s_o * s_o
    var_g = s_gg - s_g * s_g
    cov = s_og - s_o * s_g
    c1 = params.c1(o.levels)
    c2 = params.c2(o.levels)
    scores = ((2.0 * s_o * s_g + c1) * (2.0 * cov + c2)
              / ((s_o * s_o + s_g * s_g + c1) * (var_o + var_g + c2)))
    return float(min(1.0, max(-1.0, float(np.mean(scores)))))


@dataclass(frozen=True, slots=True)
class MetricsReport:
    mse: float
    psnr_db: float
    ssim: float

    def to_json_dict(self) -> dict:
        return {"mse": self.mse, "psnr_db": self.psnr_db, "ssim": self.ssim}


def compute_report(o: GrayImage, g: GrayImage,
                   params: SsimParams | None = None) -> MetricsReport:
    return MetricsReport(mse(o, g), psnr(o, g), ssim(o, g, params))


# ---------------------------------------------------------------------------
# PGM input/output
# ---------------------------------------------------------------------------

_TOKEN = re.compile(rb"\S+")


def _pgm_tokens(data: bytes, count: int, offset: int) -> tuple[list[bytes], int]:
    """Next `count` whitespace-separated tokens, skipping # comments."""
    tokens: list[bytes] = []
    pos = offset
    while len(tokens) < count:
        m = _TOKEN.search(data, pos)
        if m is None:
            raise PgmFormatError("unexpected end of file in header")
        tok = m.group()
        if tok.startswith(b"#"):
            eol = data.find(b"\n", m.start())
            if eol < 0:
                raise PgmFormatError("unterminated comment")
            pos = eol + 1
            continue
        tokens.append(tok)
        pos = m.end()
    return tokens, pos


def load_pgm(path: str | Path) -> GrayImage:
    """Read an ASCII (P2) or binary (P5) PGM file as a GrayImage.

    The level count is maxval + 1, so an ordinary 8-bit file yields L=256.
    Binary files with maxval above 255 use two big-endian bytes per pixel.
    """
    data = Path(path).read_bytes()
    magic_tokens, pos = _pgm_tokens(data, 1, 0)
    magic = magic_tokens[0]
    if magic not in (b"P2", b"P5"):
        raise PgmFormatError(f"not a PGM file (magic {magic!r})")
    dims, pos = _pgm_tokens(data, 3, pos)
    try:
        width, height, maxval = (int(t) for t in dims)
    except ValueError:
        raise PgmFormatError(f"non-numeric header fields {dims!r}") from None
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if not 1 <= maxval <= MAX_PGM_MAXVAL:
        raise PgmFormatError(f"maxval {maxval} outside [1, {MAX_PGM_MAXVAL}]")

    if magic == b"P2":
        toks, _ = _pgm_tokens(data, width * height, pos)
        try:
            values = [int(t) for t in toks]
        except ValueError:
            raise PgmFormatError("non-numeric pixel data") from None
        px = np.array(values, dtype=np.int64).reshape(height, width)
    else:
        # exactly one whitespace byte separates the header from the raster
        if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
            raise PgmFormatError("missing separator before binary raster")
        pos += 1
        per_px = 2 if maxval > 255 else 1
        need = width * height * per_px
        raster = data[pos:pos + need]
        if len(raster) < need:
            raise PgmFormatError(
                f"truncated raster: wanted {need} bytes, found {len(raster)}"
            )
        dtype = ">u2" if per_px == 2 else np.uint8
        px = np.frombuffer(raster, dtype=dtype).astype(np.int64)
        px = px.reshape(height, width)

    if int(px.max()) > maxval:
        raise PgmFormatError(f"pixel value {int(px.max())} exceeds maxval {maxval}")
    return GrayImage(px, levels=maxval + 1)


def save_pgm(image: GrayImage, path: str | Path, binary: bool = True) -> None:
    """Write a GrayImage as P5 (binary) or P2 (ASCII)."""
    maxval = image.levels - 1
    if maxval > MAX_PGM_MAXVAL:
        raise PgmFormatError(f"levels {image.levels} not representable in PGM")
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n{maxval}\n"
    if binary:
        dtype = ">u2" if maxval > 255 else np.uint8
        body = image.pixels.astype(dtype).tobytes()
        Path(path).write_bytes(header.encode("ascii") + body)
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in image.pixels)
        Path(path).write_text(header + rows + "\n")

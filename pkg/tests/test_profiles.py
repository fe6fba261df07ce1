import math

import pytest
from hypothesis import given, strategies as st

from tandem import (
    InfeasiblePartitionError,
    LatencyProfile,
    ProfileConsistencyError,
    ProfileEntry,
    SchemaError,
    build_chain,
    dumps_json,
    prefix_sums,
    profile_from_json_dict,
    profile_to_json_dict,
    quantize_ms,
    synthesize_profile,
    validate_profile_against,
)

from conftest import uniform_profile


def small_profile():
    return LatencyProfile(
        model_name="m",
        entries=(ProfileEntry("a", 1.5, 1.0),
                 ProfileEntry("b", 2.0, None),
                 ProfileEntry("c", 0.5, 0.25)),
        transition_dla_to_gpu_ms=0.5,
        transition_gpu_to_dla_ms=0.25,
        contention_gamma=1.25,
    )


# --- construction --------------------------------------------------------


def test_entry_times_must_be_positive():
    with pytest.raises(SchemaError):
        ProfileEntry("a", 0.0, None)
    with pytest.raises(SchemaError):
        ProfileEntry("a", 1.0, -1.0)


def test_profile_validation():
    with pytest.raises(SchemaError):
        LatencyProfile("m", ())
    with pytest.raises(SchemaError):
        LatencyProfile("m", (ProfileEntry("a", 1.0, None),), contention_gamma=0.5)
    with pytest.raises(SchemaError):
        LatencyProfile("m", (ProfileEntry("a", 1.0, None),),
                       transition_dla_to_gpu_ms=-0.1)
    with pytest.raises(SchemaError):
        LatencyProfile("m", (ProfileEntry("a", 1.0, None),
                             ProfileEntry("a", 1.0, None)))


def test_gamma_of_exactly_one_allowed():
    p = LatencyProfile("m", (ProfileEntry("a", 1.0, None),), contention_gamma=1.0)
    assert p.contention_gamma == 1.0


# --- prefix sums ---------------------------------------------------------


def test_segment_sums_match_direct_addition():
    ps = prefix_sums(small_profile())
    assert ps.segment_gpu(0, 3) == 1.5 + 2.0 + 0.5
    assert ps.segment_gpu(1, 2) == 2.0
    assert ps.segment_gpu(2, 2) == 0.0
    assert ps.segment_dla(2, 3) == 0.25
    assert ps.segment_dla(0, 1) == 1.0


def test_segment_dla_raises_on_gpu_only_layer():
    ps = prefix_sums(small_profile())
    with pytest.raises(InfeasiblePartitionError):
        ps.segment_dla(0, 3)
    with pytest.raises(InfeasiblePartitionError):
        ps.segment_dla(1, 2)


def test_prefix_and_suffix_feasibility_bounds():
    ps = prefix_sums(small_profile())
    assert ps.longest_dla_prefix() == 1
    assert ps.earliest_dla_suffix() == 2
    full = prefix_sums(uniform_profile("u", 4))
    assert full.longest_dla_prefix() == 4
    assert full.earliest_dla_suffix() == 0
    none = prefix_sums(uniform_profile("n", 3, dla_holes=(0, 1, 2)))
    assert none.longest_dla_prefix() == 0
    assert none.earliest_dla_suffix() == 3


def test_segment_bounds_checked():
    ps = prefix_sums(small_profile())
    with pytest.raises(IndexError):
        ps.segment_gpu(-1, 2)
    with pytest.raises(IndexError):
        ps.segment_gpu(2, 4)
    with pytest.raises(IndexError):
        ps.segment_gpu(2, 1)


@given(st.lists(st.floats(min_value=0.01, max_value=50.0,
                          allow_nan=False, allow_infinity=False),
                min_size=1, max_size=40),
       st.data())
def test_interior_segments_match_direct_sum(times, data):
    entries = tuple(ProfileEntry(f"l{k}", t, t) for k, t in enumerate(times))
    profile = LatencyProfile("h", entries)
    ps = prefix_sums(profile)
    n = len(times)
    i = data.draw(st.integers(min_value=0, max_value=n))
    j = data.draw(st.integers(min_value=i, max_value=n))
    direct = 0.0
    for t in times[i:j]:
        direct += t
    got = ps.segment_gpu(i, j)
    assert got == pytest.approx(direct, rel=1e-12, abs=1e-12)
    if i == 0:
        # prefixes are exact partial sums, not approximations
        assert got == direct


def test_quantized_times_make_interior_segments_exact():
    times = [quantize_ms(x) for x in (0.37, 1.91, 2.504, 0.063, 5.125)]
    entries = tuple(ProfileEntry(f"l{k}", t, t) for k, t in enumerate(times))
    ps = prefix_sums(LatencyProfile("q", entries))
    for i in range(6):
        for j in range(i, 6):
            direct = 0.0
            for t in times[i:j]:
                direct += t
            assert ps.segment_gpu(i, j) == direct


def test_quantize_ms_grid():
    assert quantize_ms(1.0) == 1.0
    assert quantize_ms(0.0001) == 1 / 1024  # never rounds to zero
    assert quantize_ms(0.37) == round(0.37 * 1024) / 1024
    assert math.remainder(quantize_ms(3.1415) * 1024, 1) == 0


# --- cross-validation against a graph ------------------------------------


def test_validate_profile_against_graph():
    g = build_chain("peer", 3)
    profile = LatencyProfile(
        "peer",
        tuple(ProfileEntry(f"l{k:04d}", 1.0, 1.0) for k in range(3)),
    )
    validate_profile_against(profile, g)


def test_validate_rejects_name_mismatch():
    g = build_chain("peer", 2)
    profile = uniform_profile("other", 2)
    with pytest.raises(ProfileConsistencyError):
        validate_profile_against(profile, g)


def test_validate_rejects_wrong_layer_order():
    g = build_chain("peer", 2)
    profile = LatencyProfile(
        "peer",
        (ProfileEntry("l0001", 1.0, 1.0), ProfileEntry("l0000", 1.0, 1.0)),
    )
    with pytest.raises(ProfileConsistencyError):
        validate_profile_against(profile, g)


def test_validate_rejects_dla_time_on_incompatible_layer(pix2pix_original):
    profile = synthesize_profile(pix2pix_original, seed=1)
    bad_entries = tuple(
        ProfileEntry(e.layer_id, e.gpu_ms, e.gpu_ms if e.dla_ms is None else e.dla_ms)
        for e in profile.entries
    )
    bad = LatencyProfile(profile.model_name, bad_entries)
    with pytest.raises(ProfileConsistencyError):
        validate_profile_against(bad, pix2pix_original)


def test_validate_rejects_missing_dla_time_on_compatible_layer(pix2pix_crop):
    profile = synthesize_profile(pix2pix_crop, seed=1)
    bad_entries = tuple(ProfileEntry(e.layer_id, e.gpu_ms, None)
                        for e in profile.entries)
    bad = LatencyProfile(profile.model_name, bad_entries)
    with pytest.raises(ProfileConsistencyError):
        validate_profile_against(bad, pix2pix_crop)


# --- synthesis -----------------------------------------------------------


def test_synthesize_is_deterministic(pix2pix_original):
    p1 = synthesize_profile(pix2pix_original, seed=42)
    p2 = synthesize_profile(pix2pix_original, seed=42)
    assert p1 == p2
    assert p1 != synthesize_profile(pix2pix_original, seed=43)


def test_synthesize_respects_compatibility(pix2pix_original):
    profile = synthesize_profile(pix2pix_original, seed=7)
    validate_profile_against(profile, pix2pix_original)
    holes = [e.layer_id for e in profile.entries if e.dla_ms is None]
    assert holes == [f"dec{b}.deconv" for b in range(1, 8)] + ["out.deconv"]


def test_synthesize_times_on_grid(pix2pix_crop):
    profile = synthesize_profile(pix2pix_crop, seed=3, dla_speed_ratio=1.2)
    for e in profile.entries:
        assert e.gpu_ms * 1024 == int(e.gpu_ms * 1024)
        assert e.dla_ms * 1024 == int(e.dla_ms * 1024)
        assert 0.4 < e.gpu_ms < 1.6


# --- JSON ----------------------------------------------------------------


def test_profile_json_round_trip():
    p = small_profile()
    doc = profile_to_json_dict(p)
    assert doc["version"] == 1
    assert doc["model_name"] == "m"
    assert doc["contention_gamma"] == 1.25
    back = profile_from_json_dict(doc)
    assert back == p
    assert dumps_json(profile_to_json_dict(back)) == dumps_json(doc)


def test_profile_json_omits_missing_dla():
    doc = profile_to_json_dict(small_profile())
    assert "dla_ms" not in doc["entries"][1]
    assert doc["entries"][0]["dla_ms"] == 1.0


def test_profile_json_rejects_unknown_keys():
    doc = profile_to_json_dict(small_profile())
    doc["units"] = "ms"
    with pytest.raises(SchemaError):
        profile_from_json_dict(doc)
    doc = profile_to_json_dict(small_profile())
    doc["entries"][0]["note"] = "?"
    with pytest.raises(SchemaError):
        profile_from_json_dict(doc)


def test_profile_json_requires_gpu_time():
    doc = profile_to_json_dict(small_profile())
    del doc["entries"][0]["gpu_ms"]
    with pytest.raises(SchemaError):
        profile_from_json_dict(doc)

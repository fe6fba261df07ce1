import pytest

from tandem import (
    Engine,
    LatencyProfile,
    ModelSchedule,
    Pix2PixVariant,
    ProfileEntry,
    Segment,
    build_pix2pix_generator,
)

DATA_DIR = __file__.rsplit("/", 1)[0] + "/data"


@pytest.fixture(scope="session")
def pix2pix_original():
    return build_pix2pix_generator(Pix2PixVariant.ORIGINAL)


@pytest.fixture(scope="session")
def pix2pix_crop():
    return build_pix2pix_generator(Pix2PixVariant.CROP)


@pytest.fixture(scope="session")
def pix2pix_conv():
    return build_pix2pix_generator(Pix2PixVariant.CONV)


def uniform_profile(name, layers, gpu_ms=1.0, dla_ms=1.0,
                    t_d2g=0.0, t_g2d=0.0, gamma=1.0, dla_holes=()):
    """Profile with identical per-layer costs; dla_holes marks GPU-only layers."""
    entries = tuple(
        ProfileEntry(f"l{k:03d}", gpu_ms, None if k in set(dla_holes) else dla_ms)
        for k in range(layers)
    )
    return LatencyProfile(
        model_name=name,
        entries=entries,
        transition_dla_to_gpu_ms=t_d2g,
        transition_gpu_to_dla_ms=t_g2d,
        contention_gamma=gamma,
    )


def golden_fallback_inputs():
    """The three-layer fallback scenario frozen in data/naive_fallback_golden.json."""
    gan_prof = LatencyProfile(
        model_name="gan",
        entries=(ProfileEntry("l0", 1.0, 1.0),
                 ProfileEntry("l1", 2.0, None),
                 ProfileEntry("l2", 1.0, 1.0)),
        transition_dla_to_gpu_ms=0.5,
        transition_gpu_to_dla_ms=0.5,
        contention_gamma=1.0,
    )
    yolo_prof = LatencyProfile(
        model_name="yolo",
        entries=(ProfileEntry("y0", 2.0, None),),
        transition_dla_to_gpu_ms=0.5,
        transition_gpu_to_dla_ms=0.5,
        contention_gamma=1.0,
    )
    gan_sched = ModelSchedule("gan", (
        Segment(0, 1, Engine.DLA),
        Segment(1, 2, Engine.GPU, fallback=True),
        Segment(2, 3, Engine.DLA),
    ))
    yolo_sched = ModelSchedule("yolo", (Segment(0, 1, Engine.GPU),))
    return [gan_sched, yolo_sched], [gan_prof, yolo_prof]

"""Assign layer ranges of two concurrent models to two engines.

Two placement families are produced here. The naive one keeps each model on
its preferred engine: model A runs on the accelerator wherever its layers
are supported, dropping to GPU fallback segments in between, while model B
owns the GPU. Fallback is what makes this bad: every incompatible run of A
barges into B's engine.

The swap family cuts each model once and runs the halves counter-phased:
while A's head executes on the accelerator, B's head executes on the GPU;
then both streams cross over. One cycle completes one frame of each model,
so the cycle period is the quantity to minimize:

    phase1  = gamma * max(dla_a[0, i), gpu_b[0, j))
    phase2  = gamma * max(gpu_a[i, n), dla_b[j, m))
    period  = phase1 + phase2 + transition costs

`search_swap` scans every feasible cut pair with O(1) prefix-sum range
queries and keeps the first minimum, so ties resolve to the smallest i,
then the smallest j. The arithmetic is plain float sums in a fixed order;
an independent enumeration that sums latencies directly (on grid-quantized
profiles) reproduces the periods bit for bit rather than approximately.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

from .compat import CompatReport, check_graph
from .errors import (
    InfeasiblePartitionError,
    NoFeasiblePartitionError,
    ProfileConsistencyError,
    SchemaError,
)
from .graph_ir import ModelGraph, dumps_json, linearize, loads_json
from .profiles import LatencyProfile, PrefixSums, prefix_sums


class Engine(str, Enum):
    GPU = "GPU"
    DLA = "DLA"


class ScheduleKind(str, Enum):
    NAIVE = "naive"
    SWAP = "swap"


@dataclass(frozen=True, slots=True)
class Segment:
    """Layers [start, end) of one model bound to one engine.

    `fallback` marks accelerator-intended layers forced onto the GPU by a
    compatibility gap; it never appears on the accelerator itself.
    """

    start: int
    end: int
    engine: Engine
    fallback: bool = False

    def __post_init__(self):
        if not (isinstance(self.start, int) and isinstance(self.end, int)):
            raise SchemaError("segment bounds must be integers")
        if not 0 <= self.start < self.end:
            raise SchemaError(f"segment [{self.start}, {self.end}) is empty or negative")
        if not isinstance(self.engine, Engine):
            raise SchemaError(f"segment engine must be an Engine, got {self.engine!r}")
        if self.fallback and self.engine is not Engine.GPU:
            raise SchemaError("fallback segments run on the GPU by definition")


@dataclass(frozen=True, slots=True)
class ModelSchedule:
    """One model's ordered segments, covering [0, layer_count) exactly."""

    model_name: str
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.model_name:
            raise SchemaError("schedule: model name must be non-empty")
        if not self.segments:
            raise SchemaError(f"schedule for {self.model_name}: no segments")
        if self.segments[0].start != 0:
            raise SchemaError(f"schedule for {self.model_name}: must start at layer 0")
        for a, b in zip(self.segments, self.segments[1:]):
            if b.start != a.end:
                raise SchemaError(
                    f"schedule for {self.model_name}: gap or overlap at layer {a.end}"
                )

    @property
    def layer_count(self) -> int:
        return self.segments[-1].end


@dataclass(frozen=True, slots=True)
class Schedule:
    kind: ScheduleKind
    models: tuple[ModelSchedule, ...]

    def __post_init__(self):
        if not 1 <= len(self.models) <= 2:
            raise SchemaError("a schedule holds one or two models")
        names = [m.model_name for m in self.models]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate model names in schedule: {names}")
        if self.kind is ScheduleKind.SWAP:
            if len(self.models) != 2:
                raise SchemaError("a swap schedule pairs exactly two models")
            for m in self.models:
                if len(m.segments) != 2:
                    raise SchemaError(
                        f"swap schedule for {m.model_name}: needs exactly two segments"
                    )
                first, second = m.segments
                if first.fallback or second.fallback:
                    raise SchemaError(
                        f"swap schedule for {m.model_name}: fallback not allowed"
                    )
                if first.engine is second.engine:
                    raise SchemaError(
                        f"swap schedule for {m.model_name}: segments must be on "
                        f"opposite engines"
                    )
            if self.models[0].segments[0].engine is self.models[1].segments[0].engine:
                raise SchemaError(
                    "swap schedule: the two models must start on opposite engines"
                )

    def model(self, name: str) -> ModelSchedule:
        for m in self.models:
            if m.model_name == name:
                return m
        raise SchemaError(f"no model {name!r} in schedule")


def single_engine_schedule(model_name: str, layer_count: int,
                           engine: Engine) -> Schedule:
    """The whole model as one segment on one engine."""
    return Schedule(ScheduleKind.NAIVE, (
        ModelSchedule(model_name, (Segment(0, layer_count, engine),)),
    ))


def naive_schedule(model_a: ModelGraph, model_b: ModelGraph,
                   profile_a: LatencyProfile, profile_b: LatencyProfile,
                   compat_a: CompatReport | None = None) -> Schedule:
    """Model A on the accelerator with GPU fallback gaps; model B all GPU.

    A's segments alternate between its maximal accelerator-compatible runs
    and fallback segments covering the incompatible layers between them. A
    model with no compatible layer degenerates to a single fallback segment.
    """
    if compat_a is None:
        compat_a = check_graph(model_a)
    if compat_a.model_name != model_a.name:
        raise ProfileConsistencyError(
            f"compat report is for {compat_a.model_name!r}, "
            f"model is {model_a.name!r}"
        )
    for graph, profile in ((model_a, profile_a), (model_b, profile_b)):
        if profile.model_name != graph.name:
            raise ProfileConsistencyError(
                f"profile is for {profile.model_name!r}, model is {graph.name!r}"
            )
        if profile.layer_ids != linearize(graph):
            raise ProfileConsistencyError(
                f"profile {profile.model_name}: entries do not match the "
                f"linearized layer order"
            )

    n = len(compat_a.layer_ids)
    segments: list[Segment] = []
    cursor = 0
    for start, end in compat_a.dla_subgraphs:
        if cursor < start:
            segments.append(Segment(cursor, start, Engine.GPU, fallback=True))
        segments.append(Segment(start, end, Engine.DLA))
        cursor = end
    if cursor < n:
        segments.append(Segment(cursor, n, Engine.GPU, fallback=True))

    return Schedule(ScheduleKind.NAIVE, (
        ModelSchedule(model_a.name, tuple(segments)),
        ModelSchedule(model_b.name, (Segment(0, len(profile_b), Engine.GPU),)),
    ))


# ---------------------------------------------------------------------------
# swap estimation and search
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ScheduleEstimate:
    """Analytic steady-state cost of one swap cycle.

    One cycle finishes one frame of each model, so per-model throughput is
    1000 / period. Idle figures are per engine per cycle, with each engine
    also idle while the other one absorbs its transition.
    """

    period_ms: float
    fps_per_model: float
    phase1_ms: float
    phase2_ms: float
    transition_ms: float
    idle_gpu_ms: float
    idle_dla_ms: float

    def to_json_dict(self) -> dict:
        return {
            "period_ms": self.period_ms,
            "fps_per_model": self.fps_per_model,
            "phase1_ms": self.phase1_ms,
            "phase2_ms": self.phase2_ms,
            "transition_ms": self.transition_ms,
            "idle_gpu_ms": self.idle_gpu_ms,
            "idle_dla_ms": self.idle_dla_ms,
        }


def _estimate(ps_a: PrefixSums, ps_b: PrefixSums, i: int, j: int,
              charge_segment_boundaries: bool) -> ScheduleEstimate:
    pa = ps_a.profile
    pb = ps_b.profile
    n = len(ps_a)
    m = len(ps_b)
    gamma = max(pa.contention_gamma, pb.contention_gamma)

    head_a = ps_a.segment_dla(0, i)
    head_b = ps_b.segment_gpu(0, j)
    tail_a = ps_a.segment_gpu(i, n)
    tail_b = ps_b.segment_dla(j, m)

    phase1 = gamma * max(head_a, head_b)
    phase2 = gamma * max(tail_a, tail_b)
    # One crossover per cycle: A leaves the accelerator, B enters it. The
    # flag additionally bills the wrap back to phase 1 of the next frame.
    transition = (pa.transition_dla_to_gpu_ms + pb.transition_gpu_to_dla_ms)
    if charge_segment_boundaries:
        transition += (pa.transition_gpu_to_dla_ms + pb.transition_dla_to_gpu_ms)
    period = phase1 + phase2 + transition

    busy_gpu = gamma * (head_b + tail_a) + pa.transition_dla_to_gpu_ms
    busy_dla = gamma * (head_a + tail_b) + pb.transition_gpu_to_dla_ms
    if charge_segment_boundaries:
        busy_gpu += pb.transition_dla_to_gpu_ms
        busy_dla += pa.transition_gpu_to_dla_ms
    return ScheduleEstimate(
        period_ms=period,
        fps_per_model=1000.0 / period,
        phase1_ms=phase1,
        phase2_ms=phase2,
        transition_ms=transition,
        idle_gpu_ms=period - busy_gpu,
        idle_dla_ms=period - busy_dla,
    )


def estimate_swap(i: int, j: int, profile_a: LatencyProfile,
                  profile_b: LatencyProfile, *,
                  charge_segment_boundaries: bool = False) -> ScheduleEstimate:
    """Cost of cutting model A at layer i and model B at layer j.

    A runs [0, i) on the accelerator and [i, n) on the GPU; B runs [0, j)
    on the GPU and [j, m) on the accelerator. Both cuts must be interior
    and the accelerator ranges must be fully supported.
    """
    ps_a = prefix_sums(profile_a)
    ps_b = prefix_sums(profile_b)
    if not 0 < i < len(ps_a):
        raise InfeasiblePartitionError(
            f"{profile_a.model_name}: cut {i} not interior to [0, {len(ps_a)})"
        )
    if not 0 < j < len(ps_b):
        raise InfeasiblePartitionError(
            f"{profile_b.model_name}: cut {j} not interior to [0, {len(ps_b)})"
        )
    return _estimate(ps_a, ps_b, i, j, charge_segment_boundaries)


def swap_schedule(i: int, j: int, model_a: str, model_b: str,
                  layers_a: int, layers_b: int) -> Schedule:
    return Schedule(ScheduleKind.SWAP, (
        ModelSchedule(model_a, (Segment(0, i, Engine.DLA),
                                Segment(i, layers_a, Engine.GPU))),
        ModelSchedule(model_b, (Segment(0, j, Engine.GPU),
                                Segment(j, layers_b, Engine.DLA))),
    ))


class SwapPlan(NamedTuple):
    i: int
    j: int
    schedule: Schedule
    estimate: ScheduleEstimate


def search_swap(profile_a: LatencyProfile, profile_b: LatencyProfile, *,
                charge_segment_boundaries: bool = False) -> SwapPlan:
    """Minimize the swap period over every feasible cut pair.

    Infeasible cuts are pruned up front: i may not pass A's longest
    accelerator-supported prefix, j may not precede B's earliest supported
    suffix. Strictly-better periods replace the incumbent, so the result is
    the smallest i, then smallest j, among the minimizers.
    """
    ps_a = prefix_sums(profile_a)
    ps_b = prefix_sums(profile_b)
    n = len(ps_a)
    m = len(ps_b)
    i_hi = min(n - 1, ps_a.longest_dla_prefix())
    j_lo = max(1, ps_b.earliest_dla_suffix())
    if n < 2 or m < 2 or i_hi < 1 or j_lo > m - 1:
        raise NoFeasiblePartitionError(
            f"no interior cut pair places both accelerator ranges on "
            f"supported layers ({profile_a.model_name} / {profile_b.model_name})"
        )
    best: SwapPlan | None = None
    for i in range(1, i_hi + 1):
        for j in range(j_lo, m):
            est = _estimate(ps_a, ps_b, i, j, charge_segment_boundaries)
            if best is None or est.period_ms < best.estimate.period_ms:
                schedule = swap_schedule(i, j, profile_a.model_name,
                                         profile_b.model_name, n, m)
                best = SwapPlan(i, j, schedule, est)
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def schedule_to_json_dict(schedule: Schedule) -> dict:
    return {
        "kind": schedule.kind.value,
        "models": [
            {
                "name": m.model_name,
                "segments": [
                    {"start": s.start, "end": s.end, "engine": s.engine.value,
                     "fallback": s.fallback}
                    for s in m.segments
                ],
            }
            for m in schedule.models
        ],
        "version": 1,
    }


def schedule_from_json_dict(obj) -> Schedule:
    if not isinstance(obj, dict):
        raise SchemaError("schedule: expected an object")
    keys = {"kind", "models", "version"}
    if obj.keys() != keys:
        raise SchemaError(f"schedule: expected exactly fields {sorted(keys)}")
    if obj["version"] != 1:
        raise SchemaError(f"schedule: unsupported version {obj['version']!r}")
    try:
        kind = ScheduleKind(obj["kind"])
    except ValueError:
        raise SchemaError(f"schedule: unknown kind {obj['kind']!r}") from None
    if not isinstance(obj["models"], list):
        raise SchemaError("schedule.models: expected a list")
    models = []
    for mi, m in enumerate(obj["models"]):
        where = f"schedule.models[{mi}]"
        if not isinstance(m, dict) or m.keys() != {"name", "segments"}:
            raise SchemaError(f"{where}: expected exactly name and segments")
        if not isinstance(m["name"], str):
            raise SchemaError(f"{where}.name: expected a string")
        if not isinstance(m["segments"], list):
            raise SchemaError(f"{where}.segments: expected a list")
        segments = []
        for si, s in enumerate(m["segments"]):
            swhere = f"{where}.segments[{si}]"
            want = {"start", "end", "engine", "fallback"}
            if not isinstance(s, dict) or s.keys() != want:
                raise SchemaError(f"{swhere}: expected exactly fields {sorted(want)}")
            try:
                engine = Engine(s["engine"])
            except ValueError:
                raise SchemaError(
                    f"{swhere}: unknown engine {s['engine']!r}"
                ) from None
            if not isinstance(s["fallback"], bool):
                raise SchemaError(f"{swhere}.fallback: expected a boolean")
            for bound in ("start", "end"):
                if not isinstance(s[bound], int) or isinstance(s[bound], bool):
                    raise SchemaError(f"{swhere}.{bound}: expected an integer")
            segments.append(Segment(s["start"], s["end"], engine, s["fallback"]))
        models.append(ModelSchedule(m["name"], tuple(segments)))
    return Schedule(kind, tuple(models))


def save_schedule(schedule: Schedule, path: str | Path) -> None:
    Path(path).write_text(dumps_json(schedule_to_json_dict(schedule)))


def load_schedule(path: str | Path) -> Schedule:
    return schedule_from_json_dict(loads_json(Path(path).read_text(), "schedule"))

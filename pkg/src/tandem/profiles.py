"""Per-layer latency profiles and the prefix sums scheduling queries run on.

A profile records, for every layer of a model in linearized order, its GPU
latency and (when the layer is accelerator-compatible) its accelerator
latency, plus two engine-transition costs and a contention stretch factor
gamma (how much slower an engine runs while the other is busy; 1.0 means
no interference).

Partition search asks for sums over layer ranges thousands of times, so
`PrefixSums` precomputes cumulative latencies once and answers any
half-open [i, j) range by subtraction. The cumulative arrays are the exact
left-to-right partial sums, so a query with i == 0 reproduces direct
summation bit for bit.

`synthesize_profile` draws latencies on a 1/1024 ms grid. On that grid every
partial sum up to millions of layers is an exact binary float, so interior
range queries are exact too, not merely close: schedule periods computed
via prefix sums equal the same periods computed by direct summation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from math import isfinite
from pathlib import Path
from typing import Sequence

from .compat import CompatRule, check_graph
from .errors import InfeasiblePartitionError, ProfileConsistencyError, SchemaError
from .graph_ir import ModelGraph, dumps_json, linearize, loads_json

QUANTUM_MS = 1.0 / 1024.0

DEFAULT_TRANSITION_MS = 0.1
DEFAULT_GAMMA = 1.0


def _check_ms(value: float, what: str, minimum: float,
              exc: type[Exception] = SchemaError) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise exc(f"{what}: expected a number, got {value!r}")
    value = float(value)
    if not isfinite(value) or value < minimum:
        raise exc(f"{what}: must be a finite number >= {minimum}, got {value}")
    return value


@dataclass(frozen=True, slots=True)
class ProfileEntry:
    layer_id: str
    gpu_ms: float
    dla_ms: float | None = None

    def __post_init__(self):
        if not self.layer_id:
            raise SchemaError("profile entry: layer_id must be non-empty")
        object.__setattr__(self, "gpu_ms",
                           _check_ms(self.gpu_ms, f"{self.layer_id}: gpu_ms", 1e-9))
        if self.dla_ms is not None:
            object.__setattr__(self, "dla_ms",
                               _check_ms(self.dla_ms, f"{self.layer_id}: dla_ms", 1e-9))


@dataclass(frozen=True, slots=True)
class LatencyProfile:
    model_name: str
    entries: tuple[ProfileEntry, ...]
    transition_dla_to_gpu_ms: float = DEFAULT_TRANSITION_MS
    transition_gpu_to_dla_ms: float = DEFAULT_TRANSITION_MS
    contention_gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not self.model_name:
            raise SchemaError("profile: model name must be non-empty")
        if not self.entries:
            raise SchemaError(f"profile {self.model_name}: no entries")
        ids = [e.layer_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"profile {self.model_name}: duplicate layer ids")
        object.__setattr__(
            self, "transition_dla_to_gpu_ms",
            _check_ms(self.transition_dla_to_gpu_ms,
                      f"profile {self.model_name}: dla_to_gpu transition", 0.0))
        object.__setattr__(
            self, "transition_gpu_to_dla_ms",
            _check_ms(self.transition_gpu_to_dla_ms,
                      f"profile {self.model_name}: gpu_to_dla transition", 0.0))
        object.__setattr__(
            self, "contention_gamma",
            _check_ms(self.contention_gamma,
                      f"profile {self.model_name}: contention_gamma", 1.0))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def layer_ids(self) -> tuple[str, ...]:
        return tuple(e.layer_id for e in self.entries)


# ---------------------------------------------------------------------------
# range-sum queries
# ---------------------------------------------------------------------------


class PrefixSums:
    """Cumulative latencies of one profile, indexed like its entry list.

    `gpu[k]` is the exact left-to-right sum of gpu_ms over layers [0, k].
    The accelerator array treats missing latencies as holes: a range query
    that spans a hole raises, because no schedule may place an incompatible
    layer on the accelerator.
    """

    def __init__(self, profile: LatencyProfile):
        self.profile = profile
        gpu: list[float] = []
        dla: list[float] = []
        holes: list[int] = []
        g = 0.0
        d = 0.0
        h = 0
        for e in profile.entries:
            g = g + e.gpu_ms
            gpu.append(g)
            if e.dla_ms is None:
                h += 1
            else:
                d = d + e.dla_ms
            dla.append(d)
            holes.append(h)
        self.gpu = tuple(gpu)
        self.dla = tuple(dla)
        self._holes = tuple(holes)

    def __len__(self) -> int:
        return len(self.gpu)

    def _check_range(self, i: int, j: int) -> None:
        if not (0 <= i <= j <= len(self.gpu)):
            raise IndexError(f"range [{i}, {j}) out of bounds for {len(self.gpu)} layers")

    def segment_gpu(self, i: int, j: int) -> float:
        """Sum of GPU latencies over layers [i, j)."""
        self._check_range(i, j)
        if i == j:
            return 0.0
        if i == 0:
            return self.gpu[j - 1]
        return self.gpu[j - 1] - self.gpu[i - 1]

    def segment_dla(self, i: int, j: int) -> float:
        """Sum of accelerator latencies over layers [i, j); all must have one."""
        self._check_range(i, j)
        if i == j:
            return 0.0
        holes = self._holes[j - 1] - (self._holes[i - 1] if i else 0)
        if holes:
            raise InfeasiblePartitionError(
                f"{self.profile.model_name}: layers [{i}, {j}) include {holes} "
                f"without accelerator support"
            )
        if i == 0:
            return self.dla[j - 1]
        return self.dla[j - 1] - self.dla[i - 1]

    def longest_dla_prefix(self) -> int:
        """Largest i such that every layer in [0, i) has an accelerator time."""
        for k, e in enumerate(self.profile.entries):
            if e.dla_ms is None:
                return k
        return len(self.gpu)

    def earliest_dla_suffix(self) -> int:
        """Smallest j such that every layer in [j, n) has an accelerator time."""
        j = len(self.gpu)
        for k in range(len(self.gpu) - 1, -1, -1):
            if self.profile.entries[k].dla_ms is None:
                break
            j = k
        return j


def prefix_sums(profile: LatencyProfile) -> PrefixSums:
    return PrefixSums(profile)


# ---------------------------------------------------------------------------
# consistency against a graph and rule set
# ---------------------------------------------------------------------------


def validate_profile_against(profile: LatencyProfile, graph: ModelGraph,
                             rules: Sequence[CompatRule] | None = None,
                             coerce_fp32: bool = True) -> None:
    """Require the profile to describe exactly this graph.

    Entry order must equal the linearized layer order, the names must match,
    and accelerator latencies must be present precisely on the layers the
    rule set admits. Both directions are errors: a latency for an
    incompatible layer is as wrong as a missing one.
    """
    if profile.model_name != graph.name:
        raise ProfileConsistencyError(
            f"profile is for {profile.model_name!r}, graph is {graph.name!r}"
        )
    order = linearize(graph)
    if profile.layer_ids != order:
        raise ProfileConsistencyError(
            f"profile {profile.model_name}: entries do not match the "
            f"linearized layer order"
        )
    report = check_graph(graph, rules, coerce_fp32)
    for entry, verdict in zip(profile.entries, report.verdicts):
        if verdict.compatible and entry.dla_ms is None:
            raise ProfileConsistencyError(
                f"{profile.model_name}: {entry.layer_id} is accelerator-"
                f"compatible but has no dla_ms"
            )
        if not verdict.compatible and entry.dla_ms is not None:
            raise ProfileConsistencyError(
                f"{profile.model_name}: {entry.layer_id} violates "
                f"{list(verdict.violations)} yet has a dla_ms"
            )


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def quantize_ms(value: float) -> float:
    """Snap to the 1/1024 ms grid, never below one quantum."""
    return max(1, round(value * 1024)) * QUANTUM_MS


def synthesize_profile(graph: ModelGraph, seed: int,
                       gpu_mean_ms: float = 1.0,
                       dla_speed_ratio: float = 1.0,
                       rules: Sequence[CompatRule] | None = None,
                       coerce_fp32: bool = True,
                       transition_dla_to_gpu_ms: float = DEFAULT_TRANSITION_MS,
                       transition_gpu_to_dla_ms: float = DEFAULT_TRANSITION_MS,
                       contention_gamma: float = DEFAULT_GAMMA) -> LatencyProfile:
    """Draw a reproducible synthetic profile for a graph.

    GPU latencies are uniform on [0.5, 1.5] times the mean; accelerator
    latencies are the GPU time divided by `dla_speed_ratio` (above 1 means
    the accelerator is faster), present only on compatible layers. All
    latencies land on the 1/1024 ms grid, which keeps later range-sum
    arithmetic exact. The same seed always yields the same profile.
    """
    _check_ms(gpu_mean_ms, "gpu_mean_ms", 1e-9)
    _check_ms(dla_speed_ratio, "dla_speed_ratio", 1e-9)
    rng = random.Random(seed)
    report = check_graph(graph, rules, coerce_fp32)
    entries = []
    for lid, verdict in zip(report.layer_ids, report.verdicts):
        gpu_ms = quantize_ms(rng.uniform(0.5 * gpu_mean_ms, 1.5 * gpu_mean_ms))
        dla_ms = quantize_ms(gpu_ms / dla_speed_ratio) if verdict.compatible else None
        entries.append(ProfileEntry(lid, gpu_ms, dla_ms))
    return LatencyProfile(graph.name, tuple(entries),
                          transition_dla_to_gpu_ms, transition_gpu_to_dla_ms,
                          contention_gamma)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def profile_to_json_dict(profile: LatencyProfile) -> dict:
    entries = []
    for e in profile.entries:
        rec: dict = {"layer_id": e.layer_id, "gpu_ms": e.gpu_ms}
        if e.dla_ms is not None:
            rec["dla_ms"] = e.dla_ms
        entries.append(rec)
    return {
        "model_name": profile.model_name,
        "entries": entries,
        "transition_dla_to_gpu_ms": profile.transition_dla_to_gpu_ms,
        "transition_gpu_to_dla_ms": profile.transition_gpu_to_dla_ms,
        "contention_gamma": profile.contention_gamma,
        "version": 1,
    }


def profile_from_json_dict(obj) -> LatencyProfile:
    if not isinstance(obj, dict):
        raise SchemaError("profile: expected an object")
    keys = {"model_name", "entries", "transition_dla_to_gpu_ms",
            "transition_gpu_to_dla_ms", "contention_gamma", "version"}
    missing = keys - obj.keys()
    if missing:
        raise SchemaError(f"profile: missing {sorted(missing)}")
    unknown = obj.keys() - keys
    if unknown:
        raise SchemaError(f"profile: unknown fields {sorted(unknown)}")
    if obj["version"] != 1:
        raise SchemaError(f"profile: unsupported version {obj['version']!r}")
    if not isinstance(obj["model_name"], str):
        raise SchemaError("profile.model_name: expected a string")
    if not isinstance(obj["entries"], list):
        raise SchemaError("profile.entries: expected a list")
    entries = []
    for i, e in enumerate(obj["entries"]):
        where = f"profile.entries[{i}]"
        if not isinstance(e, dict):
            raise SchemaError(f"{where}: expected an object")
        required = {"layer_id", "gpu_ms"}
        if not required <= e.keys() or not e.keys() <= required | {"dla_ms"}:
            raise SchemaError(
                f"{where}: expected layer_id, gpu_ms and optional dla_ms"
            )
        if not isinstance(e["layer_id"], str):
            raise SchemaError(f"{where}.layer_id: expected a string")
        gpu_ms = _check_ms(e["gpu_ms"], f"{where}.gpu_ms", 1e-9)
        dla_ms = e.get("dla_ms")
        if dla_ms is not None:
            dla_ms = _check_ms(dla_ms, f"{where}.dla_ms", 1e-9)
        entries.append(ProfileEntry(e["layer_id"], gpu_ms, dla_ms))
    return LatencyProfile(
        obj["model_name"], tuple(entries),
        _check_ms(obj["transition_dla_to_gpu_ms"],
                  "profile.transition_dla_to_gpu_ms", 0.0),
        _check_ms(obj["transition_gpu_to_dla_ms"],
                  "profile.transition_gpu_to_dla_ms", 0.0),
        _check_ms(obj["contention_gamma"], "profile.contention_gamma", 1.0),
    )


def save_profile(profile: LatencyProfile, path: str | Path) -> None:
    Path(path).write_text(dumps_json(profile_to_json_dict(profile)))


def load_profile(path: str | Path, graph: ModelGraph | None = None,
                 rules: Sequence[CompatRule] | None = None,
                 coerce_fp32: bool = True) -> LatencyProfile:
    """Read a profile; with a graph supplied, also cross-check it."""
    profile = profile_from_json_dict(loads_json(Path(path).read_text(), "profile"))
    if graph is not None:
        validate_profile_against(profile, graph, rules, coerce_fp32)
    return profile

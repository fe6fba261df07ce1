"""Event-driven replay of one or two streaming models over two serial engines.

Each model is an endless source of frames pushed through its schedule's
segments in order. The simulation rules:

  * An engine runs one thing at a time and serves its queue FIFO by arrival
    time, ties broken by model name (then frame, then segment).
  * A segment becomes ready the instant its predecessor finishes: the
    previous segment of the same frame or, for a frame's first segment,
    the first segment of the previous frame. That second rule is the
    admission policy: sources are saturated, so frame f+1 enters the moment
    the engine owning the first segment could accept it.
  * When consecutive segments of one model land on different engines, the
    crossing charges that model's transition cost, occupying the
    destination engine immediately before the segment body. The wrap from
    a frame's last segment back to the next frame's first segment crosses
    engines the same way.
  * While both engines are occupied and the contention factor gamma
    exceeds 1, executing segment bodies progress at rate 1/gamma
    (piecewise linear). Transitions are unaffected.

Every quantity is derived from the resulting timeline: busy time per
engine, utilization and idle against the horizon (completion of the last
frame), and per-model throughput measured after discarding warm-up frames.
Identical inputs produce byte-identical JSON output.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum
from math import ceil
from typing import Iterable, Mapping, Sequence

from .errors import SchemaError, SimulationError
from .graph_ir import dumps_json, loads_json
from .profiles import LatencyProfile, prefix_sums
from .scheduler import Engine, ModelSchedule, Schedule

DEFAULT_WARMUP_FRAMES = 3


class EventKind(str, Enum):
    EXEC = "Exec"
    TRANSITION = "Transition"
    FALLBACK = "Fallback"


@dataclass(frozen=True, slots=True)
class TimelineEntry:
    """One contiguous occupancy of one engine."""

    engine: Engine
    model: str
    frame: int
    kind: EventKind
    layer_start: int
    layer_end: int
    start_ms: float
    end_ms: float


@dataclass(frozen=True)
class SimResult:
    fps: dict[str, float]
    utilization: dict[str, float]
    idle_ms: dict[str, float]
    frames_completed: dict[str, int]
    timeline: tuple[TimelineEntry, ...]
    horizon_ms: float
    busy_ms: dict[str, float]
    completions_ms: dict[str, tuple[float, ...]]

    def to_json_dict(self) -> dict:
        return {
            "fps": dict(self.fps),
            "utilization": dict(self.utilization),
            "idle_ms": dict(self.idle_ms),
            "frames_completed": dict(self.frames_completed),
            "timeline": [_entry_to_json(e) for e in self.timeline],
        }


# ---------------------------------------------------------------------------
# static per-model tables
# ---------------------------------------------------------------------------


class _SegmentRun:
    """Resolved execution facts for one segment of one model."""

    __slots__ = ("engine", "kind", "duration", "start", "end", "lead_in")

    def __init__(self, engine: Engine, kind: EventKind, duration: float,
                 start: int, end: int, lead_in: float):
        self.engine = engine
        self.kind = kind
        self.duration = duration
        self.start = start
        self.end = end
        # transition cost paid on this engine right before the body; the
        # first segment stores the wrap cost, charged from frame 2 on
        self.lead_in = lead_in


def _transition_cost(profile: LatencyProfile, src: Engine, dst: Engine) -> float:
    if src is dst:
        return 0.0
    if dst is Engine.GPU:
        return profile.transition_dla_to_gpu_ms
    return profile.transition_gpu_to_dla_ms


def _resolve_model(ms: ModelSchedule, profile: LatencyProfile) -> list[_SegmentRun]:
    if profile.model_name != ms.model_name:
        raise SimulationError(
            f"profile {profile.model_name!r} does not match model {ms.model_name!r}"
        )
    if len(profile) != ms.layer_count:
        raise SimulationError(
            f"{ms.model_name}: schedule covers {ms.layer_count} layers, "
            f"profile has {len(profile)}"
        )
    ps = prefix_sums(profile)
    runs: list[_SegmentRun] = []
    for k, seg in enumerate(ms.segments):
        if seg.engine is Engine.DLA:
            duration = ps.segment_dla(seg.start, seg.end)
            kind = EventKind.EXEC
        else:
            duration = ps.segment_gpu(seg.start, seg.end)
            kind = EventKind.FALLBACK if seg.fallback else EventKind.EXEC
        prev = ms.segments[k - 1].engine  # k=0 wraps to the last segment
        runs.append(_SegmentRun(seg.engine, kind, duration, seg.start, seg.end,
                                _transition_cost(profile, prev, seg.engine)))
    return runs


# ---------------------------------------------------------------------------
# the event loop
# ---------------------------------------------------------------------------


class _Unit:
    """One segment instance of one frame, queued and run as a whole."""

    __slots__ = ("model", "frame", "seg", "run", "arrival",
                 "part_kind", "remaining", "part_started")

    def __init__(self, model: str, frame: int, seg: int, run: _SegmentRun,
                 arrival: float, with_lead_in: bool):
        self.model = model
        self.frame = frame
        self.seg = seg
        self.run = run
        self.arrival = arrival
        if with_lead_in and run.lead_in > 0.0:
            self.part_kind = EventKind.TRANSITION
            self.remaining = run.lead_in
        else:
            self.part_kind = run.kind
            self.remaining = run.duration
        self.part_started = 0.0

    def queue_key(self) -> tuple:
        return (self.arrival, self.model, self.frame, self.seg)


def _normalize_models(
    schedules: Schedule | ModelSchedule | Sequence[Schedule | ModelSchedule],
) -> tuple[ModelSchedule, ...]:
    if isinstance(schedules, (Schedule, ModelSchedule)):
        schedules = (schedules,)
    models: list[ModelSchedule] = []
    for sched in schedules:
        if isinstance(sched, Schedule):
            models.extend(sched.models)
        elif isinstance(sched, ModelSchedule):
            models.append(sched)
        else:
            raise SimulationError(f"not a schedule: {sched!r}")
    if not 1 <= len(models) <= 2:
        raise SimulationError(f"simulation takes 1 or 2 models, got {len(models)}")
    names = [m.model_name for m in models]
    if len(set(names)) != len(names):
        raise SimulationError(f"duplicate model names: {names}")
    return tuple(models)


def _normalize_profiles(
    profiles: Mapping[str, LatencyProfile] | Iterable[LatencyProfile],
    models: tuple[ModelSchedule, ...],
) -> dict[str, LatencyProfile]:
    if isinstance(profiles, Mapping):
        table = dict(profiles)
    else:
        table = {}
        for p in profiles:
            if not isinstance(p, LatencyProfile):
                raise SimulationError(f"not a profile: {p!r}")
            table[p.model_name] = p
    for m in models:
        if m.model_name not in table:
            raise SimulationError(f"no profile for model {m.model_name!r}")
    return table


def simulate(schedules: Schedule | Sequence[Schedule],
             profiles: Mapping[str, LatencyProfile] | Iterable[LatencyProfile],
             frames: int,
             warmup_frames: int = DEFAULT_WARMUP_FRAMES) -> SimResult:
    """Run `frames` frames of every model to completion and measure.

    Throughput discards min(warmup_frames, frames - 1) leading frames of
    each model and divides the remaining frame count by the time from the
    last warm-up completion to the final one, so a long run converges to
    the steady-state rate.
    """
    if not isinstance(frames, int) or isinstance(frames, bool) or frames < 1:
        raise SimulationError(f"frames must be a positive integer, got {frames!r}")
    if warmup_frames < 0:
        raise SimulationError(f"warmup_frames must be >= 0, got {warmup_frames}")
    models = _normalize_models(schedules)
    table = _normalize_profiles(profiles, models)
    runs = {m.model_name: _resolve_model(m, table[m.model_name]) for m in models}
    gamma = max(table[m.model_name].contention_gamma for m in models)

    queues: dict[Engine, list[tuple]] = {Engine.DLA: [], Engine.GPU: []}
    running: dict[Engine, _Unit | None] = {Engine.DLA: None, Engine.GPU: None}
    timeline: list[TimelineEntry] = []
    completions: dict[str, list[float]] = {m.model_name: [] for m in models}

    def release(model: str, frame: int, seg: int, now: float) -> None:
        run = runs[model][seg]
        with_lead_in = seg > 0 or frame > 1
        unit = _Unit(model, frame, seg, run, now, with_lead_in)
        heapq.heappush(queues[run.engine], (unit.queue_key(), unit))

    def assign(now: float) -> None:
        for engine in (Engine.DLA, Engine.GPU):
            if running[engine] is None and queues[engine]:
                _, unit = heapq.heappop(queues[engine])
                unit.part_started = now
                running[engine] = unit

    now = 0.0
    for m in models:
        release(m.model_name, 1, 0, now)
    assign(now)

    while running[Engine.DLA] is not None or running[Engine.GPU] is not None:
        both_busy = (running[Engine.DLA] is not None
                     and running[Engine.GPU] is not None)
        stretch = gamma if both_busy else 1.0

        def wall_needed(unit: _Unit) -> float:
            if unit.part_kind is EventKind.TRANSITION:
                return unit.remaining
            return unit.remaining * stretch

        active = [u for u in running.values() if u is not None]
        dt = min(wall_needed(u) for u in active)
        finishers = [u for u in active if wall_needed(u) == dt]
        now += dt
        for u in active:
            if u in finishers:
                continue
            if u.part_kind is EventKind.TRANSITION:
                u.remaining -= dt
            else:
                u.remaining -= dt / stretch
            if u.remaining < 0.0:
                u.remaining = 0.0

        # Complete every finisher before assigning, so units arriving at
        # this instant compete fairly for every engine freed at it.
        finishers.sort(key=lambda u: (u.run.engine.value, u.model, u.frame, u.seg))
        for u in finishers:
            timeline.append(TimelineEntry(
                u.run.engine, u.model, u.frame, u.part_kind,
                u.run.start, u.run.end, u.part_started, now,
            ))
            if u.part_kind is EventKind.TRANSITION:
                u.part_kind = u.run.kind
                u.remaining = u.run.duration
                u.part_started = now
                continue
            running[u.run.engine] = None
            model_runs = runs[u.model]
            if u.seg == 0 and u.frame < frames:
                release(u.model, u.frame + 1, 0, now)
            if u.seg + 1 < len(model_runs):
                release(u.model, u.frame, u.seg + 1, now)
            else:
                completions[u.model].append(now)
        assign(now)

    timeline.sort(key=lambda e: (e.start_ms, e.engine.value, e.model, e.frame))
    horizon = max((e.end_ms for e in timeline), default=0.0)
    busy = {Engine.GPU.value: 0.0, Engine.DLA.value: 0.0}
    for e in timeline:
        busy[e.engine.value] += e.end_ms - e.start_ms

    fps: dict[str, float] = {}
    for m in models:
        done = completions[m.model_name]
        w = min(warmup_frames, frames - 1)
        t_w = 0.0 if w == 0 else done[w - 1]
        fps[m.model_name] = 1000.0 * (frames - w) / (done[-1] - t_w)

    return SimResult(
        fps=fps,
        utilization={k: (busy[k] / horizon if horizon > 0 else 0.0) for k in busy},
        idle_ms={k: horizon - busy[k] for k in busy},
        frames_completed={m.model_name: len(completions[m.model_name])
                          for m in models},
        timeline=tuple(timeline),
        horizon_ms=horizon,
        busy_ms=busy,
        completions_ms={k: tuple(v) for k, v in completions.items()},
    )


# ---------------------------------------------------------------------------
# timeline export
# ---------------------------------------------------------------------------


def _entry_to_json(e: TimelineEntry) -> dict:
    return {
        "engine": e.engine.value,
        "model": e.model,
        "frame": e.frame,
        "kind": e.kind.value,
        "layer_start": e.layer_start,
        "layer_end": e.layer_end,
        "start_ms": e.start_ms,
        "end_ms": e.end_ms,
    }


def _entry_from_json(obj, where: str) -> TimelineEntry:
    want = {"engine", "model", "frame", "kind", "layer_start", "layer_end",
            "start_ms", "end_ms"}
    if not isinstance(obj, dict) or obj.keys() != want:
        raise SchemaError(f"{where}: expected exactly fields {sorted(want)}")
    try:
        engine = Engine(obj["engine"])
        kind = EventKind(obj["kind"])
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    if not isinstance(obj["model"], str):
        raise SchemaError(f"{where}.model: expected a string")
    for k in ("frame", "layer_start", "layer_end"):
        if not isinstance(obj[k], int) or isinstance(obj[k], bool):
            raise SchemaError(f"{where}.{k}: expected an integer")
    for k in ("start_ms", "end_ms"):
        if isinstance(obj[k], bool) or not isinstance(obj[k], (int, float)):
            raise SchemaError(f"{where}.{k}: expected a number")
    return TimelineEntry(engine, obj["model"], obj["frame"], kind,
                         obj["layer_start"], obj["layer_end"],
                         float(obj["start_ms"]), float(obj["end_ms"]))


def parse_timeline(doc: str) -> tuple[TimelineEntry, ...]:
    obj = loads_json(doc, "timeline")
    if not isinstance(obj, list):
        raise SchemaError("timeline: expected a JSON list")
    return tuple(_entry_from_json(e, f"timeline[{i}]") for i, e in enumerate(obj))


def _gantt_letters(timeline: Sequence[TimelineEntry]) -> dict[str, str]:
    names = sorted({e.model for e in timeline})
    return {name: chr(ord("A") + i) for i, name in enumerate(names)}


def _text_gantt(timeline: Sequence[TimelineEntry]) -> str:
    letters = _gantt_letters(timeline)
    legend = " ".join(f"{v}={k}" for k, v in letters.items())
    lines = [f"legend: {legend} (lowercase=transition, .=idle)".rstrip()]
    horizon = max((e.end_ms for e in timeline), default=0.0)
    cells = ceil(horizon)
    by_engine: dict[Engine, list[TimelineEntry]] = {Engine.DLA: [], Engine.GPU: []}
    for e in timeline:
        by_engine[e.engine].append(e)
    for engine in (Engine.DLA, Engine.GPU):
        row = []
        for c in range(cells):
            mid = c + 0.5
            glyph = "."
            for e in by_engine[engine]:
                if e.start_ms <= mid < e.end_ms:
                    letter = letters[e.model]
                    glyph = letter.lower() if e.kind is EventKind.TRANSITION else letter
                    break
            row.append(glyph)
        lines.append(f"{engine.value:>3} |{''.join(row)}")
    return "\n".join(lines) + "\n"


_SVG_COLORS = ("#4e79a7", "#f28e2b")
_SVG_ROW = {Engine.DLA: 0, Engine.GPU: 1}


def _svg_gantt(timeline: Sequence[TimelineEntry]) -> str:
    letters = _gantt_letters(timeline)
    colors = {name: _SVG_COLORS[i % len(_SVG_COLORS)]
              for i, name in enumerate(sorted(letters))}
    horizon = max((e.end_ms for e in timeline), default=0.0)
    scale = 900.0 / horizon if horizon > 0 else 1.0
    width = 980
    height = 110
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for engine, row in _SVG_ROW.items():
        y = 20 + row * 40
        parts.append(
            f'<text x="8" y="{y + 20}" font-family="monospace" '
            f'font-size="12">{engine.value}</text>'
        )
        parts.append(
            f'<line x1="60" y1="{y + 30}" x2="{width - 20}" y2="{y + 30}" '
            f'stroke="#cccccc"/>'
        )
    for e in timeline:
        y = 20 + _SVG_ROW[e.engine] * 40
        x = 60.0 + e.start_ms * scale
        w = (e.end_ms - e.start_ms) * scale
        opacity = "0.45" if e.kind is EventKind.TRANSITION else "1.0"
        parts.append(
            f'<rect x="{x:.3f}" y="{y}" width="{w:.3f}" height="28" '
            f'fill="{colors[e.model]}" fill-opacity="{opacity}" '
            f'stroke="#333333" stroke-width="0.5"/>'
        )
    for i, (name, color) in enumerate(sorted(colors.items())):
        x = 60 + i * 220
        parts.append(
            f'<rect x="{x}" y="{height - 18}" width="12" height="12" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{x + 18}" y="{height - 8}" font-family="monospace" '
            f'font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_timeline(timeline: Sequence[TimelineEntry], format: str) -> str:
    """Render a timeline as "json" (lossless), "text_gantt", or "svg"."""
    if format == "json":
        return dumps_json([_entry_to_json(e) for e in timeline])
    if format == "text_gantt":
        return _text_gantt(timeline)
    if format == "svg":
        return _svg_gantt(timeline)
    raise SimulationError(f"unsupported timeline format {format!r}")

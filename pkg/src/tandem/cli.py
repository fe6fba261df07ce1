"""Command-line front end.

Every subcommand reads and writes JSON files (or standard output) so runs
can be chained into pipelines; human-oriented summaries go to standard
error. Exit codes: 0 success, 1 for any domain or validation failure, 2
for usage errors. Given the same inputs and seed, every output byte is
reproducible, including the final run report (which embeds input digests
rather than timestamps).

Flag values win over the optional JSON config file (--config), which wins
over built-in defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

from . import compat as compat_mod
from . import metrics as metrics_mod
from .errors import SchemaError, TandemError
from .graph_ir import (
    dumps_json,
    graph_to_json_dict,
    load_graph,
    loads_json,
    param_count,
    save_graph,
)
from .profiles import (
    LatencyProfile,
    load_profile,
    save_profile,
    synthesize_profile,
)
from .rewrite import Strategy, substitute_deconv_padding
from .scheduler import (
    load_schedule,
    naive_schedule,
    save_schedule,
    schedule_to_json_dict,
    search_swap,
)
from .simulator import export_timeline, simulate
from .zoo import Pix2PixVariant, build_chain, build_pix2pix_generator

_CONFIG_KEYS = frozenset({
    "seed", "frames", "warmup", "k1", "k2", "limit",
    "gpu_mean_ms", "dla_speed_ratio", "transition_ms", "gamma",
    "coerce_fp32",
})

_DEFAULTS = {
    "seed": 0,
    "frames": 100,
    "warmup": 3,
    "k1": 0.01,
    "k2": 0.03,
    "limit": compat_mod.DLA_SUBGRAPH_LIMIT,
    "gpu_mean_ms": 1.0,
    "dla_speed_ratio": 1.0,
    "transition_ms": 0.1,
    "gamma": 1.0,
    "coerce_fp32": True,
}


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    obj = loads_json(Path(path).read_text(), "config")
    if not isinstance(obj, dict):
        raise SchemaError("config: expected a JSON object")
    unknown = obj.keys() - _CONFIG_KEYS
    if unknown:
        raise SchemaError(f"config: unknown keys {sorted(unknown)}")
    return obj


class _Settings:
    """Flag > config > default resolution for one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_config(getattr(args, "config", None))

    def get(self, key: str, flag_value=None):
        if flag_value is not None:
            return flag_value
        if key in self.config:
            return self.config[key]
        return _DEFAULTS[key]


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_json(doc, out: Path | None) -> None:
    _emit(dumps_json(doc), out)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _load_rules(path: Path | None):
    return None if path is None else compat_mod.load_rules(path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_build_model(args: argparse.Namespace, settings: _Settings) -> int:
    if args.chain is not None:
        name = args.name or f"chain-{args.chain}"
        graph = build_chain(name, args.chain)
    else:
        graph = build_pix2pix_generator(Pix2PixVariant(args.variant))
        if args.name:
            graph = replace(graph, name=args.name)
    if args.out is None:
        _emit_json(graph_to_json_dict(graph), None)
    else:
        save_graph(graph, args.out)
    _say(f"model: {graph.name}")
    _say(f"layers: {len(graph.layers)}")
    _say(f"parameters: {param_count(graph)}")
    return 0


def _cmd_check(args: argparse.Namespace, settings: _Settings) -> int:
    graph = load_graph(args.model)
    rules = _load_rules(args.rules)
    coerce = settings.get("coerce_fp32",
                          False if args.no_coerce_fp32 else None)
    limit = settings.get("limit", args.limit)
    report = compat_mod.check_graph(graph, rules, coerce_fp32=bool(coerce))
    _emit_json(report.to_json_dict(), args.out)
    _say(f"model: {report.model_name}")
    _say(f"incompatible layers: {report.incompatible_count} of {len(report.layer_ids)}")
    for verdict in report.verdicts:
        if verdict.violations:
            _say(f"  {verdict.layer_id}: violates {', '.join(verdict.violations)}")
    _say(f"accelerator subgraphs: {report.subgraph_count} (limit {limit})")
    compat_mod.assert_subgraph_limit(report, int(limit))
    return 0


def _cmd_rewrite(args: argparse.Namespace, settings: _Settings) -> int:
    graph = load_graph(args.model)
    rewritten, report = substitute_deconv_padding(graph, Strategy(args.strategy))
    save_graph(rewritten, args.out)
    if args.report is not None:
        _emit_json(report.to_json_dict(), args.report)
    _say(f"substituted deconvolutions: {len(report.substitutions)}")
    _say(f"parameter delta: {report.param_delta}")
    _say(f"shapes preserved: {report.shape_preserved}")
    return 0


def _resolve_profiles(args: argparse.Namespace,
                      settings: _Settings) -> tuple[LatencyProfile, LatencyProfile]:
    rules = _load_rules(args.rules)
    got_files = args.profile_a is not None or args.profile_b is not None
    if got_files:
        if args.profile_a is None or args.profile_b is None:
            raise SchemaError("schedule: --profile-a and --profile-b go together")
        graph_a = load_graph(args.model_a) if args.model_a else None
        graph_b = load_graph(args.model_b) if args.model_b else None
        return (load_profile(args.profile_a, graph_a, rules),
                load_profile(args.profile_b, graph_b, rules))
    if args.model_a is None or args.model_b is None:
        raise SchemaError(
            "schedule: synthesizing profiles needs --model-a and --model-b"
        )
    flag_seed = (args.synth_seed if args.synth_seed is not None
                 else getattr(args, "seed", None))
    seed = int(settings.get("seed", flag_seed))
    mean = float(settings.get("gpu_mean_ms", args.synth_gpu_mean_ms))
    ratio = float(settings.get("dla_speed_ratio", args.synth_dla_speed_ratio))
    transition = float(settings.get("transition_ms", args.synth_transition_ms))
    gamma = float(settings.get("gamma", args.synth_gamma))
    profiles = []
    for k, model_path in enumerate((args.model_a, args.model_b)):
        graph = load_graph(model_path)
        profiles.append(synthesize_profile(
            graph, seed + k, gpu_mean_ms=mean, dla_speed_ratio=ratio,
            rules=rules, transition_dla_to_gpu_ms=transition,
            transition_gpu_to_dla_ms=transition, contention_gamma=gamma,
        ))
    for profile, out in ((profiles[0], args.profile_a_out),
                         (profiles[1], args.profile_b_out)):
        if out is not None:
            save_profile(profile, out)
    return profiles[0], profiles[1]


def _cmd_schedule(args: argparse.Namespace, settings: _Settings) -> int:
    profile_a, profile_b = _resolve_profiles(args, settings)
    if args.mode == "naive":
        if args.estimate_out is not None:
            _say("error: --estimate-out applies to swap schedules only")
            return 2
        if args.model_a is None or args.model_b is None:
            raise SchemaError("schedule: naive mode needs --model-a and --model-b")
        graph_a = load_graph(args.model_a)
        graph_b = load_graph(args.model_b)
        rules = _load_rules(args.rules)
        compat_a = compat_mod.check_graph(graph_a, rules)
        schedule = naive_schedule(graph_a, graph_b, profile_a, profile_b, compat_a)
        seg_a = schedule.models[0].segments
        _say(f"model {graph_a.name}: {len(seg_a)} segments, "
             f"{sum(1 for s in seg_a if s.fallback)} fallback")
        _say(f"model {graph_b.name}: GPU resident")
    else:
        plan = search_swap(profile_a, profile_b,
                           charge_segment_boundaries=args.charge_segment_boundaries)
        schedule = plan.schedule
        if args.estimate_out is not None:
            _emit_json(plan.estimate.to_json_dict(), args.estimate_out)
        _say(f"partition points: i={plan.i} ({profile_a.model_name}), "
             f"j={plan.j} ({profile_b.model_name})")
        _say(f"estimated period: {plan.estimate.period_ms} ms "
             f"({plan.estimate.fps_per_model} fps per model)")
    if args.out is None:
        _emit_json(schedule_to_json_dict(schedule), None)
    else:
        save_schedule(schedule, args.out)
    return 0


_GANTT_FORMATS = {".svg": "svg", ".json": "json"}


def _cmd_simulate(args: argparse.Namespace, settings: _Settings) -> int:
    schedule = load_schedule(args.schedule)
    profiles = [load_profile(p) for p in args.profiles]
    frames = int(settings.get("frames", args.frames))
    warmup = int(settings.get("warmup", args.warmup))
    result = simulate(schedule, profiles, frames, warmup_frames=warmup)
    _emit_json(result.to_json_dict(), args.out)
    if args.gantt is not None:
        fmt = _GANTT_FORMATS.get(Path(args.gantt).suffix, "text_gantt")
        Path(args.gantt).write_text(export_timeline(result.timeline, fmt))
    for name, value in sorted(result.fps.items()):
        _say(f"fps {name}: {value}")
    for engine, value in sorted(result.utilization.items()):
        _say(f"utilization {engine}: {value}")
    return 0


def _cmd_metrics(args: argparse.Namespace, settings: _Settings) -> int:
    ref = metrics_mod.load_pgm(args.ref)
    test = metrics_mod.load_pgm(args.test)
    params = metrics_mod.SsimParams(
        k1=float(settings.get("k1", args.k1)),
        k2=float(settings.get("k2", args.k2)),
        window=args.window,
    )
    report = metrics_mod.compute_report(ref, test, params)
    _emit_json(report.to_json_dict(), args.out)
    return 0


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _cmd_report(args: argparse.Namespace, settings: _Settings) -> int:
    schedule = load_schedule(args.schedule)
    sim_doc = loads_json(Path(args.sim).read_text(), "simulation result")
    want = {"fps", "utilization", "idle_ms", "frames_completed", "timeline"}
    if not isinstance(sim_doc, dict) or not want <= sim_doc.keys():
        raise SchemaError(f"simulation result: expected fields {sorted(want)}")
    sched_names = {m.model_name for m in schedule.models}
    sim_names = set(sim_doc["fps"])
    if sched_names != sim_names:
        raise SchemaError(
            f"schedule models {sorted(sched_names)} do not match "
            f"simulated models {sorted(sim_names)}"
        )

    inputs = {str(args.schedule): _digest(args.schedule),
              str(args.sim): _digest(args.sim)}
    models_summary = []
    rules = _load_rules(args.rules)
    for model_path in args.model or ():
        graph = load_graph(model_path)
        inputs[str(model_path)] = _digest(model_path)
        report = compat_mod.check_graph(graph, rules)
        models_summary.append({
            "name": graph.name,
            "layers": len(graph.layers),
            "parameters": param_count(graph),
            "dla_subgraphs": report.subgraph_count,
        })

    throughput = []
    for ms in schedule.models:
        throughput.append({
            "model": ms.model_name,
            "engine": ms.segments[-1].engine.value,
            "fps": sim_doc["fps"][ms.model_name],
        })
    doc = {
        "invocation": ["report",
                       "--schedule", str(args.schedule),
                       "--sim", str(args.sim)]
                      + [x for m in (args.model or ()) for x in ("--model", str(m))],
        "inputs": inputs,
        "outputs": [str(args.out)] if args.out is not None else [],
        "summary": {
            "schedule_kind": schedule.kind.value,
            "throughput": throughput,
            "utilization": sim_doc["utilization"],
            "idle_ms": sim_doc["idle_ms"],
            "frames_completed": sim_doc["frames_completed"],
            "models": models_summary,
        },
    }
    _emit_json(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subparser from clobbering a value parsed before the
    # subcommand ("tandem --seed 7 schedule ..." and "tandem schedule --seed
    # 7 ..." both work).
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for anything randomized (default 0)")
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS,
                        help="JSON file supplying defaults for common options")

    parser = argparse.ArgumentParser(
        prog="tandem",
        description="Plan and simulate concurrent neural-network inference "
                    "across a GPU and a fixed-function accelerator.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("build-model", parents=[common],
                       help="emit a built-in model graph as JSON")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--variant", choices=[v.value for v in Pix2PixVariant],
                       default=Pix2PixVariant.ORIGINAL.value,
                       help="pix2pix generator variant")
    group.add_argument("--chain", type=int, metavar="N",
                       help="a straight N-layer activation chain instead")
    p.add_argument("--name", help="override the model name")
    p.add_argument("--out", type=Path, help="output path (default: stdout)")
    p.set_defaults(func=_cmd_build_model)

    p = sub.add_parser("check", parents=[common],
                       help="accelerator-compatibility report for a model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--rules", type=Path, help="rule-set JSON (default: built-in)")
    p.add_argument("--limit", type=int, default=None,
                   help="maximum accelerator subgraphs tolerated (default 16)")
    p.add_argument("--no-coerce-fp32", action="store_true",
                   help="judge FP32 layers as FP32 instead of FP16")
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("rewrite", parents=[common],
                       help="substitute padded deconvolutions")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path, help="also write a rewrite report")
    p.set_defaults(func=_cmd_rewrite)

    p = sub.add_parser("schedule", parents=[common],
                       help="produce a naive or swap schedule for two models")
    p.add_argument("--mode", choices=["naive", "swap"], required=True)
    p.add_argument("--model-a", type=Path)
    p.add_argument("--model-b", type=Path)
    p.add_argument("--profile-a", type=Path)
    p.add_argument("--profile-b", type=Path)
    p.add_argument("--rules", type=Path)
    p.add_argument("--synth-seed", type=int, default=None,
                   help="synthesize profiles with this seed (default: --seed)")
    p.add_argument("--synth-gpu-mean-ms", type=float, default=None)
    p.add_argument("--synth-dla-speed-ratio", type=float, default=None)
    p.add_argument("--synth-transition-ms", type=float, default=None)
    p.add_argument("--synth-gamma", type=float, default=None)
    p.add_argument("--profile-a-out", type=Path,
                   help="write the synthesized profile for model A here")
    p.add_argument("--profile-b-out", type=Path)
    p.add_argument("--charge-segment-boundaries", action="store_true",
                   help="bill transition costs at every engine change")
    p.add_argument("--out", type=Path, help="schedule path (default: stdout)")
    p.add_argument("--estimate-out", type=Path,
                   help="write the swap estimate here")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("simulate", parents=[common],
                       help="event-driven replay of a schedule")
    p.add_argument("--schedule", type=Path, required=True)
    p.add_argument("--profiles", type=Path, nargs="+", required=True,
                   metavar="PROFILE")
    p.add_argument("--frames", type=int, default=None,
                   help="frames per model (default 100)")
    p.add_argument("--warmup", type=int, default=None,
                   help="frames excluded from throughput (default 3)")
    p.add_argument("--gantt", type=Path,
                   help="also render the timeline (.svg, .json, else text)")
    p.add_argument("--out", type=Path, help="result path (default: stdout)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("metrics", parents=[common],
                       help="MSE, PSNR and SSIM between two PGM images")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--k1", type=float, default=None)
    p.add_argument("--k2", type=float, default=None)
    p.add_argument("--window", type=int, default=None,
                   help="windowed SSIM with this window side")
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("report", parents=[common],
                       help="consolidated run report from schedule and simulation")
    p.add_argument("--schedule", type=Path, required=True)
    p.add_argument("--sim", type=Path, required=True,
                   help="simulation result JSON from the simulate subcommand")
    p.add_argument("--model", type=Path, action="append",
                   help="model graph to summarize (repeatable)")
    p.add_argument("--rules", type=Path)
    p.add_argument("--out", type=Path, help="report path (default: stdout)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        settings = _Settings(args)
        return args.func(args, settings)
    except TandemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main(sys.argv[1:]))

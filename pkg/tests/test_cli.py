import json

import numpy as np
import pytest

from tandem import (
    DataType,
    GrayImage,
    ModelGraph,
    activation,
    build_chain,
    conv,
    deconv,
    load_graph,
    load_profile,
    load_schedule,
    save_graph,
    save_pgm,
)
from tandem.cli import main
from tandem.graph_ir import ActivationFn


def toy_graph(name="toy"):
    layers = (
        conv("head", 3, 8, 3, 1, 1, bias=False, dtype=DataType.FP16),
        deconv("up", 8, 8, 4, 2, 1, bias=False, dtype=DataType.FP16),
        activation("act", ActivationFn.RELU, dtype=DataType.FP16),
    )
    return ModelGraph(name, layers, (("head", "up"), ("up", "act")),
                      ("head",), ("act",))


# --- exit codes and diagnostics ----------------------------------------------


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 2


def test_unknown_flag_is_usage_error(capsys):
    assert main(["check", "--model", "x.json", "--frobnicate"]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_missing_file_is_domain_error(tmp_path, capsys):
    assert main(["check", "--model", str(tmp_path / "absent.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_diagnostics_go_to_stderr(tmp_path, capsys):
    out = tmp_path / "m.json"
    assert main(["build-model", "--chain", "3", "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "layers: 3" in captured.err


# --- build-model ---------------------------------------------------------------


def test_build_model_stdout_is_loadable(capsys):
    assert main(["build-model", "--chain", "4", "--name", "peer"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["name"] == "peer"
    assert len(doc["layers"]) == 4


def test_build_model_pix2pix_echoes_params(tmp_path, capsys):
    out = tmp_path / "p2p.json"
    assert main(["build-model", "--variant", "original", "--out", str(out)]) == 0
    assert "parameters: 54425859" in capsys.readouterr().err
    assert len(load_graph(out).layers) == 56


def test_build_model_variant_and_chain_conflict(capsys):
    assert main(["build-model", "--variant", "crop", "--chain", "3"]) == 2


# --- check ----------------------------------------------------------------------


def test_check_reports_violations(tmp_path, capsys):
    model = tmp_path / "toy.json"
    save_graph(toy_graph(), model)
    report = tmp_path / "report.json"
    assert main(["check", "--model", str(model), "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["incompatible_count"] == 1
    assert "violates R4" in capsys.readouterr().err


def test_check_exit_one_when_limit_exceeded(tmp_path, capsys):
    model = tmp_path / "toy.json"
    save_graph(toy_graph(), model)
    report = tmp_path / "report.json"
    # toy graph has 2 accelerator islands; cap at 1
    assert main(["check", "--model", str(model), "--limit", "1",
                 "--out", str(report)]) == 1
    assert report.exists()  # report written before the verdict
    assert "error:" in capsys.readouterr().err


def test_check_no_coerce_flag(tmp_path, capsys):
    model = tmp_path / "fp32.json"
    g = build_chain("fp32", 2, dtype=DataType.FP32)
    save_graph(g, model)
    assert main(["check", "--model", str(model)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["incompatible_count"] == 0
    assert main(["check", "--model", str(model), "--no-coerce-fp32"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["incompatible_count"] == 2


# --- rewrite ---------------------------------------------------------------------


def test_rewrite_round_trip(tmp_path, capsys):
    model = tmp_path / "toy.json"
    save_graph(toy_graph(), model)
    out = tmp_path / "fixed.json"
    rep = tmp_path / "rewrite.json"
    assert main(["rewrite", "--model", str(model), "--strategy", "conv",
                 "--out", str(out), "--report", str(rep)]) == 0
    fixed = load_graph(out)
    assert "up.conv" in fixed.by_id
    doc = json.loads(rep.read_text())
    assert doc["strategy"] == "conv"
    assert doc["param_delta"] == 9 * 8 * 8
    err = capsys.readouterr().err
    assert "substituted deconvolutions: 1" in err


# --- schedule --------------------------------------------------------------------


def make_pair(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_graph(build_chain("a", 8), a)
    save_graph(build_chain("b", 6), b)
    return a, b


def test_schedule_swap_with_synth(tmp_path, capsys):
    a, b = make_pair(tmp_path)
    out = tmp_path / "swap.json"
    est = tmp_path / "est.json"
    pa = tmp_path / "pa.json"
    pb = tmp_path / "pb.json"
    assert main(["schedule", "--mode", "swap",
                 "--model-a", str(a), "--model-b", str(b),
                 "--synth-seed", "3",
                 "--profile-a-out", str(pa), "--profile-b-out", str(pb),
                 "--out", str(out), "--estimate-out", str(est)]) == 0
    sched = load_schedule(out)
    assert sched.kind.value == "swap"
    assert load_profile(pa).model_name == "a"
    est_doc = json.loads(est.read_text())
    assert est_doc["period_ms"] > 0
    assert "partition points" in capsys.readouterr().err


def test_schedule_naive_with_synth(tmp_path, capsys):
    a, b = make_pair(tmp_path)
    out = tmp_path / "naive.json"
    assert main(["schedule", "--mode", "naive",
                 "--model-a", str(a), "--model-b", str(b),
                 "--synth-seed", "3", "--out", str(out)]) == 0
    sched = load_schedule(out)
    assert sched.kind.value == "naive"
    assert len(sched.model("a").segments) == 1  # fully compatible chain


def test_schedule_synth_requires_models(tmp_path, capsys):
    assert main(["schedule", "--mode", "swap"]) == 1
    assert "error:" in capsys.readouterr().err


def test_schedule_estimate_out_rejected_for_naive(tmp_path, capsys):
    a, b = make_pair(tmp_path)
    assert main(["schedule", "--mode", "naive",
                 "--model-a", str(a), "--model-b", str(b),
                 "--synth-seed", "1",
                 "--estimate-out", str(tmp_path / "e.json")]) == 2


def test_schedule_profile_flags_must_pair(tmp_path, capsys):
    a, b = make_pair(tmp_path)
    assert main(["schedule", "--mode", "swap",
                 "--model-a", str(a), "--model-b", str(b),
                 "--profile-a", str(tmp_path / "pa.json")]) == 1


def test_seed_flag_equivalent_to_synth_seed(tmp_path):
    a, b = make_pair(tmp_path)
    out1, out2 = tmp_path / "s1.json", tmp_path / "s2.json"
    pa1, pa2 = tmp_path / "pa1.json", tmp_path / "pa2.json"
    base = ["schedule", "--mode", "swap", "--model-a", str(a),
            "--model-b", str(b)]
    assert main(base + ["--seed", "9", "--out", str(out1),
                        "--profile-a-out", str(pa1)]) == 0
    assert main(base + ["--synth-seed", "9", "--out", str(out2),
                        "--profile-a-out", str(pa2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert pa1.read_bytes() == pa2.read_bytes()


# --- simulate --------------------------------------------------------------------


def scheduled_pair(tmp_path):
    a, b = make_pair(tmp_path)
    sched = tmp_path / "swap.json"
    pa, pb = tmp_path / "pa.json", tmp_path / "pb.json"
    assert main(["schedule", "--mode", "swap",
                 "--model-a", str(a), "--model-b", str(b),
                 "--synth-seed", "3",
                 "--profile-a-out", str(pa), "--profile-b-out", str(pb),
                 "--out", str(sched)]) == 0
    return sched, pa, pb


def test_simulate_end_to_end(tmp_path, capsys):
    sched, pa, pb = scheduled_pair(tmp_path)
    out = tmp_path / "sim.json"
    gantt = tmp_path / "g.txt"
    assert main(["simulate", "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--frames", "30", "--out", str(out),
                 "--gantt", str(gantt)]) == 0
    doc = json.loads(out.read_text())
    assert doc["frames_completed"] == {"a": 30, "b": 30}
    assert gantt.read_text().startswith("legend:")
    err = capsys.readouterr().err
    assert "fps a:" in err and "utilization GPU:" in err


def test_simulate_svg_gantt(tmp_path, capsys):
    sched, pa, pb = scheduled_pair(tmp_path)
    gantt = tmp_path / "g.svg"
    assert main(["simulate", "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--frames", "5", "--out", str(tmp_path / "sim.json"),
                 "--gantt", str(gantt)]) == 0
    assert gantt.read_text().startswith("<svg")


def test_simulate_missing_profile(tmp_path, capsys):
    sched, pa, _ = scheduled_pair(tmp_path)
    assert main(["simulate", "--schedule", str(sched),
                 "--profiles", str(pa), "--frames", "5"]) == 1


# --- metrics ---------------------------------------------------------------------


def test_metrics_to_stdout(tmp_path, capsys):
    rng = np.random.default_rng(2)
    ref = GrayImage(rng.integers(0, 256, (6, 6), dtype=np.int64))
    save_pgm(ref, tmp_path / "ref.pgm")
    save_pgm(ref, tmp_path / "same.pgm", binary=False)
    assert main(["metrics", "--ref", str(tmp_path / "ref.pgm"),
                 "--test", str(tmp_path / "same.pgm")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mse"] == 0.0
    assert doc["ssim"] == 1.0


def test_metrics_k_flags_change_ssim(tmp_path, capsys):
    rng = np.random.default_rng(3)
    o = GrayImage(rng.integers(0, 256, (5, 5), dtype=np.int64))
    g = GrayImage(rng.integers(0, 256, (5, 5), dtype=np.int64))
    save_pgm(o, tmp_path / "o.pgm")
    save_pgm(g, tmp_path / "g.pgm")
    args = ["metrics", "--ref", str(tmp_path / "o.pgm"),
            "--test", str(tmp_path / "g.pgm")]
    assert main(args) == 0
    default = json.loads(capsys.readouterr().out)["ssim"]
    assert main(args + ["--k1", "0.2", "--k2", "0.4"]) == 0
    loose = json.loads(capsys.readouterr().out)["ssim"]
    assert default != loose


def test_metrics_rejects_malformed_pgm(tmp_path, capsys):
    (tmp_path / "bad.pgm").write_text("P2 2 2 255 1 2 3")
    save_pgm(GrayImage(np.zeros((2, 2), dtype=np.int64)), tmp_path / "ok.pgm")
    assert main(["metrics", "--ref", str(tmp_path / "bad.pgm"),
                 "--test", str(tmp_path / "ok.pgm")]) == 1


# --- report ----------------------------------------------------------------------


def test_report_end_to_end(tmp_path, capsys):
    sched, pa, pb = scheduled_pair(tmp_path)
    sim = tmp_path / "sim.json"
    assert main(["simulate", "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--frames", "10", "--out", str(sim)]) == 0
    out = tmp_path / "report.json"
    assert main(["report", "--schedule", str(sched), "--sim", str(sim),
                 "--model", str(tmp_path / "a.json"),
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"invocation", "inputs", "outputs", "summary"}
    assert len(doc["inputs"]) == 3  # schedule, sim, one model
    assert all(len(digest) == 64 for digest in doc["inputs"].values())
    models = {row["model"] for row in doc["summary"]["throughput"]}
    assert models == {"a", "b"}
    assert doc["summary"]["models"][0]["name"] == "a"


def test_report_rejects_model_mismatch(tmp_path, capsys):
    sched, pa, pb = scheduled_pair(tmp_path)
    sim = tmp_path / "sim.json"
    doc = {"fps": {"x": 1.0}, "utilization": {}, "idle_ms": {},
           "frames_completed": {"x": 1}, "timeline": []}
    sim.write_text(json.dumps(doc))
    assert main(["report", "--schedule", str(sched), "--sim", str(sim)]) == 1


def test_report_is_reproducible(tmp_path):
    sched, pa, pb = scheduled_pair(tmp_path)
    sim = tmp_path / "sim.json"
    assert main(["simulate", "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--frames", "10", "--out", str(sim)]) == 0
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for r in (r1, r2):
        assert main(["report", "--schedule", str(sched), "--sim", str(sim),
                     "--out", str(r)]) == 0
    # identical invocation paths aside, the bodies must match
    d1 = json.loads(r1.read_text())
    d2 = json.loads(r2.read_text())
    d1["outputs"] = d2["outputs"] = []
    assert d1 == d2


# --- config ----------------------------------------------------------------------


def test_config_supplies_defaults(tmp_path, capsys):
    sched, pa, pb = scheduled_pair(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frames": 4, "warmup": 0}))
    out = tmp_path / "sim.json"
    assert main(["simulate", "--config", str(cfg),
                 "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["frames_completed"]["a"] == 4


def test_flag_overrides_config(tmp_path, capsys):
    sched, pa, pb = scheduled_pair(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frames": 4}))
    out = tmp_path / "sim.json"
    assert main(["simulate", "--config", str(cfg), "--frames", "6",
                 "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["frames_completed"]["a"] == 6


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"framez": 4}))
    assert main(["build-model", "--chain", "2", "--config", str(cfg)]) == 1
    assert "unknown keys" in capsys.readouterr().err


def test_config_before_subcommand_also_works(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frames": 4}))
    sched, pa, pb = scheduled_pair(tmp_path)
    out = tmp_path / "sim.json"
    assert main(["--config", str(cfg), "simulate",
                 "--schedule", str(sched),
                 "--profiles", str(pa), str(pb),
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["frames_completed"]["a"] == 4

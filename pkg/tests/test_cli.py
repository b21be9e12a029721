"""End-to-end command-line behavior."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from gapulse.cli import main
from gapulse.io import format_pulse_sequence, load_pulse_sequence
from gapulse.propagator import PulseSequence

SYSTEM_1SPIN = "n_spins = 1\nnu_hz = [0]\nnu_rf_hz = [0]\nj_hz = [[0]]\nomega_rad_s = 120880\n"
SYSTEM_3SPIN = ("n_spins = 3\nnu_hz = [100, -200, 50]\nnu_rf_hz = [0, 0, 0]\n"
                "j_hz = [69.65, 47.67, -128.32]\nomega_rad_s = 120880\n")


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "one.cfg").write_text(SYSTEM_1SPIN)
    (tmp_path / "three.cfg").write_text(SYSTEM_3SPIN)
    seq = PulseSequence.from_rows([(13, 0, 9000, 0), (0, 0, 0, 10)])
    (tmp_path / "seq.csv").write_text(format_pulse_sequence(seq))
    return tmp_path


def parse_kv_output(text):
    out = {}
    for line in text.splitlines():
        parts = line.split(" ", 1)
        if len(parts) == 2:
            out[parts[0]] = parts[1]
    return out


# ---------------------------------------------------------------- evaluate

def test_evaluate_reports_fields(runner, workdir):
    r = runner.invoke(main, ["evaluate", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(workdir / "seq.csv"),
                             "--gate", "selective90:0:Y"])
    assert r.exit_code == 0, r.output
    kv = parse_kv_output(r.output)
    assert float(kv["fidelity"]) > 0.999
    assert kv["duration_us"] == "23"
    assert float(kv["unitarity_residual"]) < 1e-9


def test_evaluate_gate_dimension_mismatch(runner, workdir):
    r = runner.invoke(main, ["evaluate", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(workdir / "seq.csv"),
                             "--gate", "fredkin"])
    assert r.exit_code == 1


def test_evaluate_empty_sequence_file(runner, workdir):
    bad = workdir / "empty.csv"
    bad.write_text("l,tau_us,sign,phi_centideg,delta_us\n")
    r = runner.invoke(main, ["evaluate", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(bad), "--gate", "selective90:0:Y"])
    assert r.exit_code == 1
    assert "error:" in r.output


def test_evaluate_malformed_sequence_line_numbered(runner, workdir):
    bad = workdir / "bad.csv"
    bad.write_text("l,tau_us,sign,phi_centideg,delta_us\n1,16,0,40000,2\n")
    r = runner.invoke(main, ["evaluate", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(bad), "--gate", "selective90:0:Y"])
    assert r.exit_code == 1
    assert ":2:" in r.output


# ---------------------------------------------------------------- optimize

def test_optimize_identity_word_trivial(runner, workdir):
    out = workdir / "opt.csv"
    cfg = workdir / "ga.cfg"
    cfg.write_text("rows = 3\nseed = 11\npopulation = 40\nmax_delay_us = 200\n"
                   "budget_main_s = 20\nbudget_local_s = 10\n"
                   "acceptance_threshold = 0.9995\n")
    r = runner.invoke(main, ["optimize", "--system", str(workdir / "one.cfg"),
                             "--gate", "word:I", "--config", str(cfg),
                             "--out", str(out)])
    assert r.exit_code == 0, r.output
    kv = parse_kv_output(r.output)
    assert float(kv["best_fitness"]) >= 0.999
    assert out.exists()
    assert (workdir / "opt.record.csv").exists()
    manifest = json.loads((workdir / "opt.csv.manifest.json").read_text())
    assert manifest["command"] == "optimize"
    assert manifest["outputs"]["best_fitness"].startswith("0.99") or \
        manifest["outputs"]["best_fitness"].startswith("1.0")


def test_optimize_malformed_config_exit_1(runner, workdir):
    cfg = workdir / "ga.cfg"
    cfg.write_text("rows = 3\nseed = 1\nnot a kv line\n")
    r = runner.invoke(main, ["optimize", "--system", str(workdir / "one.cfg"),
                             "--gate", "word:I", "--config", str(cfg),
                             "--out", str(workdir / "x.csv")])
    assert r.exit_code == 1
    assert ":3:" in r.output


def test_optimize_threshold_miss_exit_2(runner, workdir):
    out = workdir / "miss.csv"
    r = runner.invoke(main, ["optimize", "--system", str(workdir / "three.cfg"),
                             "--gate", "toffoli", "--rows", "3", "--seed", "1",
                             "--pop", "20", "--budget-main", "2s",
                             "--budget-local", "1s", "--max-generations", "3",
                             "--max-local-generations", "2", "--out", str(out)])
    assert r.exit_code == 2, r.output
    assert out.exists()  # best-effort outputs still written


def test_optimize_determinism_across_threads(runner, workdir):
    args = ["optimize", "--system", str(workdir / "one.cfg"),
            "--gate", "selective90:0:Y", "--rows", "3", "--seed", "7",
            "--pop", "30", "--budget-main", "60s", "--budget-local", "10s",
            "--max-generations", "10", "--max-local-generations", "5",
            "--acceptance" if False else "--budget-local", "10s"]
    outs = []
    for tag, threads in (("a", "1"), ("b", "2")):
        out = workdir / f"det_{tag}.csv"
        r = runner.invoke(main, ["optimize", "--system", str(workdir / "one.cfg"),
                                 "--gate", "selective90:0:Y", "--rows", "3",
                                 "--seed", "7", "--pop", "30",
                                 "--budget-main", "60s", "--budget-local", "10s",
                                 "--max-generations", "10",
                                 "--max-local-generations", "5",
                                 "--threads", threads, "--out", str(out)])
        assert r.exit_code in (0, 2), r.output
        outs.append((out.read_bytes(),
                     (workdir / f"det_{tag}.record.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_optimize_rerun_from_manifest_config_identical(runner, workdir):
    """A second run with the manifest's generation caps is bit-for-bit."""
    out1 = workdir / "m1.csv"
    r = runner.invoke(main, ["optimize", "--system", str(workdir / "one.cfg"),
                             "--gate", "selective90:0:Y", "--rows", "3",
                             "--seed", "3", "--pop", "30",
                             "--budget-main", "30s", "--budget-local", "5s",
                             "--out", str(out1)])
    assert r.exit_code in (0, 2), r.output
    manifest = json.loads((workdir / "m1.csv.manifest.json").read_text())
    ga_cfg = workdir / "replay.cfg"
    ga_cfg.write_text(manifest["config"]["ga"])
    out2 = workdir / "m2.csv"
    r2 = runner.invoke(main, ["optimize", "--system", str(workdir / "one.cfg"),
                              "--gate", manifest["config"]["gate"],
                              "--config", str(ga_cfg), "--out", str(out2)])
    assert r2.exit_code in (0, 2), r2.output
    assert out1.read_bytes() == out2.read_bytes()
    assert (workdir / "m1.record.csv").read_bytes() == \
        (workdir / "m2.record.csv").read_bytes()


# -------------------------------------------------------------------- scan

def test_scan_1x1_grid(runner, workdir):
    out = workdir / "grid.csv"
    r = runner.invoke(main, ["scan", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(workdir / "seq.csv"),
                             "--gate", "selective90:0:Y",
                             "--flip", "0:0:1", "--offset", "0:0:1",
                             "--out", str(out)])
    assert r.exit_code == 0, r.output
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert (workdir / "grid.csv.manifest.json").exists()


def test_scan_step_larger_than_span(runner, workdir):
    out = workdir / "grid2.csv"
    r = runner.invoke(main, ["scan", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(workdir / "seq.csv"),
                             "--gate", "selective90:0:Y",
                             "--flip", "0:0:1", "--offset", "-1:1:5",
                             "--out", str(out)])
    assert r.exit_code == 0, r.output


def test_scan_bad_range_exit_1(runner, workdir):
    r = runner.invoke(main, ["scan", "--system", str(workdir / "one.cfg"),
                             "--sequence", str(workdir / "seq.csv"),
                             "--gate", "selective90:0:Y",
                             "--flip", "5:1:1", "--offset", "0:0:1",
                             "--out", str(workdir / "g.csv")])
    assert r.exit_code == 1


# ------------------------------------------------------------------ export

def test_export_roundtrip_byte_identical(runner, workdir, tmp_path):
    src = workdir / "seq.csv"
    js = workdir / "seq.json"
    r = runner.invoke(main, ["export", "--sequence", str(src),
                             "--format", "json", "--out", str(js)])
    assert r.exit_code == 0
    back = workdir / "back.csv"
    r = runner.invoke(main, ["export", "--sequence", str(js),
                             "--format", "csv", "--out", str(back)])
    assert r.exit_code == 0
    assert back.read_bytes() == src.read_bytes()


def test_export_resolved_sign_folding(runner, workdir):
    seq = PulseSequence.from_rows([(10, 1, 9000, 5)])
    p = workdir / "s.csv"
    p.write_text(format_pulse_sequence(seq))
    r = runner.invoke(main, ["export", "--sequence", str(p), "--format", "resolved"])
    assert r.exit_code == 0
    assert "1,10,270.00,5" in r.output


def test_export_table_style_row(runner, workdir):
    seq = PulseSequence.from_rows([(30, 0, 32181, 277)])
    p = workdir / "s.csv"
    p.write_text(format_pulse_sequence(seq))
    r = runner.invoke(main, ["export", "--sequence", str(p), "--format", "resolved"])
    assert "1,30,321.81,277" in r.output


def test_gates_list(runner):
    r = runner.invoke(main, ["gates", "list"])
    assert r.exit_code == 0
    for form in ("selective90", "cnot", "fredkin", "toffoli", "word"):
        assert form in r.output

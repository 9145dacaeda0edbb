"""Command-line interface: exit codes, emitted artifacts, flag handling."""

import json

import pytest

from pate_fairness import cli, data

FAST_RAW = {
    "dataset": {"type": "synth", "n": 600, "d": 4,
                "margins": [2.0, 0.5], "scales": [1.0, 3.0]},
    "split": {"num_teachers": 10, "student_public_size": 60},
    "repetitions": 6,
    "flip_trials": 1000,
    "seed": 0,
}


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_run_writes_report_and_diagnostics(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", FAST_RAW)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    assert (out / "diagnostics.csv").exists()
    summary = json.loads(capsys.readouterr().out)
    assert {"gap_01", "deviation_mean", "epsilon"} <= set(summary)


def test_run_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path / "cfg.json", FAST_RAW)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    cli.main(["run", "--config", cfg, "--out", str(out1), "--seed", "7"])
    cli.main(["run", "--config", cfg, "--out", str(out2), "--seed", "7"])
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    report = json.loads((out1 / "report.json").read_text())
    assert report["config"]["seed"] == 7


def test_missing_config_file_is_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_invalid_json_is_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_bad_config_key_is_exit_2(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {**FAST_RAW, "bogus": 1})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_runtime_failure_is_exit_1(tmp_path, capsys):
    raw = {**FAST_RAW, "split": {"num_teachers": 100_000,
                                 "student_public_size": 60}}
    cfg = _write(tmp_path / "cfg.json", raw)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_sweep_writes_csv(tmp_path, capsys):
    cfg = _write(tmp_path / "sweep.json",
                 {"base": FAST_RAW, "param": "lambda", "values": [10.0, 100.0]})
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().strip().split("\n")
    assert len(lines) == 3
    summary = json.loads(capsys.readouterr().out)
    assert summary["rows"] == 2
    assert summary["failures"] == 0


def test_sweep_requires_all_keys(tmp_path):
    cfg = _write(tmp_path / "sweep.json", {"base": FAST_RAW, "param": "lambda"})
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_privacy_budget_command(capsys):
    assert cli.main(["privacy-budget", "--m", "200",
                     "--sigma", "50", "--delta", "1e-5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["epsilon"] == pytest.approx(1.9994, abs=1e-3)
    assert out["gamma_star"] == pytest.approx(12.996, abs=1e-3)


def test_synth_command_emits_loadable_csv(tmp_path, capsys):
    path = tmp_path / "synth.csv"
    assert cli.main(["synth", "--n", "50", "--d", "3", "--seed", "4",
                     "--out", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["rows"] == 50
    ds = data.load_csv(path, "label", "group")
    assert ds.n == 50 and ds.feature_dim == 3
    # pandas' float parser may differ from repr round-trips by one ulp
    direct = data.synth_two_group(50, 3, [2.0, 2.0], [1.0, 1.0], seed=4)
    import numpy as np
    np.testing.assert_allclose(np.sort(ds.X, axis=0), np.sort(direct.X, axis=0),
                               rtol=1e-14, atol=1e-14)


def test_run_csv_dataset_with_column_flags(tmp_path):
    src = tmp_path / "data.csv"
    cli.main(["synth", "--n", "800", "--d", "4", "--seed", "2",
              "--margins", "2.0", "0.5", "--out", str(src)])
    raw = {"dataset": {"type": "csv", "path": str(src), "standardize": False},
           "split": {"num_teachers": 8, "student_public_size": 60},
           "repetitions": 4, "flip_trials": 500, "seed": 0}
    cfg = _write(tmp_path / "cfg.json", raw)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", cfg, "--out", str(out),
                     "--label-col", "label", "--group-col", "group"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["groups"]) == 2

import csv
import json
import math
import subprocess
import sys

import pytest

from pwaffine.cli import (
    ConfigError,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_TOLERANCE,
    RunConfig,
    RunReport,
    config_from_dict,
    execute,
    load_config,
    parse_config,
    serialize_config,
)


def write_config(tmp_path, name="config.json", **kwargs):
    path = tmp_path / name
    path.write_text(json.dumps(kwargs))
    return path


def run_cli(args, env=None, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "pwaffine", *args],
        capture_output=True, text=True, env=env, cwd=cwd,
    )


# -- configuration ---------------------------------------------------------------


def test_config_roundtrip():
    cfg = RunConfig(command="converge", n=2, field_name="gaussian", p=2.0, q=2.0,
                    r_schedule=(0.4, 0.2), samples=8, seed=3,
                    domain=((0.0, 0.0), (1.0, 1.0)), out_dir="somewhere",
                    tolerances={"ratio_low": 1.8})
    assert parse_config(serialize_config(cfg)) == cfg


def test_config_defaults_roundtrip():
    cfg = config_from_dict({"command": "lemma1"})
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.parametrize(
    "raw",
    [
        {"command": "lemma1", "bogus": 1},
        {"command": "unknown"},
        {"command": "lemma1", "n": 4},
        {"command": "lemma1", "p": 0.5},
        {"command": "lemma1", "samples": 0},
        {"command": "lemma1", "field": "nope"},
        {"command": "converge", "r_schedule": []},
        {"command": "converge", "r_schedule": [-0.1]},
        {"command": "bv", "r_schedule": [0.5]},
        {"command": "lemma1", "domain": [[0.0], [1.0]], "n": 2},
        {"command": "lemma1", "tolerances": {"residual": "tight"}},
        {"command": "lemma1", "field": "indicator_triangle", "n": 2},
        {"command": "converge", "field": "indicator_triangle", "n": 3},
        {"command": "lemma1", "n": "many"},
        {"command": "converge", "r_schedule": 0.4},
        {},
        [],
    ],
)
def test_config_validation_rejects(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


# -- execute -----------------------------------------------------------------------


def test_execute_lemma2_affine_passes(tmp_path):
    cfg = config_from_dict(
        {"command": "lemma2", "n": 2, "field": "affine", "samples": 6,
         "seed": 3, "out_dir": str(tmp_path / "out")}
    )
    report, status = execute(cfg)
    assert status == EXIT_OK and report.passed
    assert report.results["max_residual"] <= 1e-10
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "tables" / "residuals.csv").exists()


def test_execute_bv_contains_exact_tv(tmp_path):
    cfg = config_from_dict(
        {"command": "bv", "field": "indicator_triangle", "r_schedule": [0.02],
         "samples": 20, "seed": 7, "out_dir": str(tmp_path / "out")}
    )
    report, status = execute(cfg)
    assert status == EXIT_OK, report.failures
    assert report.results["exact_tv"] == pytest.approx(2.0 + math.sqrt(2.0), abs=1e-12)
    assert report.results["studies"][0]["min_tv"] >= 3.8


def test_execute_converge_writes_plot_and_tables(tmp_path):
    cfg = config_from_dict(
        {"command": "converge", "n": 2, "field": "gaussian",
         "r_schedule": [0.4, 0.2], "samples": 3, "seed": 5,
         "out_dir": str(tmp_path / "out"),
         "tolerances": {"ratio_low": 1.5, "ratio_high": 3.0}}
    )
    report, status = execute(cfg)
    assert status == EXIT_OK, report.failures
    svg = (tmp_path / "out" / "plots" / "convergence.svg").read_text()
    assert svg.lstrip().startswith("<?xml")
    for table in ("convergence.csv", "convergence_samples.csv"):
        assert (tmp_path / "out" / "tables" / table).exists()


def test_execute_locate_demo(tmp_path):
    cfg = config_from_dict(
        {"command": "locate-demo", "n": 3, "samples": 50, "seed": 1,
         "out_dir": str(tmp_path / "out")}
    )
    report, status = execute(cfg)
    assert status == EXIT_OK
    assert report.results["min_barycentric"] >= -1e-9


def test_report_json_roundtrip(tmp_path):
    cfg = config_from_dict(
        {"command": "lemma1", "n": 1, "field": "quadratic", "samples": 3,
         "seed": 2, "out_dir": str(tmp_path / "out")}
    )
    report, _ = execute(cfg)
    text = (tmp_path / "out" / "report.json").read_text()
    parsed = RunReport.from_json(text)
    assert parsed.to_json() == text


def test_csv_cells_are_finite(tmp_path):
    cfg = config_from_dict(
        {"command": "converge", "n": 1, "field": "smooth_bump",
         "r_schedule": [0.4, 0.2], "samples": 3, "seed": 5,
         "out_dir": str(tmp_path / "out"),
         "tolerances": {"ratio_low": 1.0, "ratio_high": 4.0}}
    )
    execute(cfg)
    for path in (tmp_path / "out" / "tables").glob("*.csv"):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) > 1
        for row in rows[1:]:
            for cell in row:
                try:
                    val = float(cell)
                except ValueError:
                    continue
                assert math.isfinite(val), (path, row)


# -- the binary: exit codes and determinism --------------------------------------------


def test_cli_invalid_config_exit_2(tmp_path, cli_env):
    path = write_config(tmp_path, command="lemma1", n=9)
    proc = run_cli(["lemma1", "--config", str(path)], env=cli_env, cwd=tmp_path)
    assert proc.returncode == EXIT_CONFIG
    assert "error" in proc.stderr.lower()


def test_cli_command_mismatch_exit_2(tmp_path, cli_env):
    path = write_config(tmp_path, command="lemma1", n=2)
    proc = run_cli(["lemma2", "--config", str(path)], env=cli_env, cwd=tmp_path)
    assert proc.returncode == EXIT_CONFIG


def test_cli_tolerance_failure_exit_3(tmp_path, cli_env):
    path = write_config(
        tmp_path, command="lemma2", n=2, field="gaussian", samples=3, seed=1,
        out_dir="out", tolerances={"residual": 1e-30},
    )
    proc = run_cli(["lemma2", "--config", str(path)], env=cli_env, cwd=tmp_path)
    assert proc.returncode == EXIT_TOLERANCE


def test_cli_pass_exit_0_and_overrides(tmp_path, cli_env):
    path = write_config(tmp_path, command="lemma2", n=2, field="affine",
                        samples=20, seed=1, out_dir="out")
    proc = run_cli(
        ["lemma2", "--config", str(path), "--out", "elsewhere", "--seed", "9",
         "--samples", "4"],
        env=cli_env, cwd=tmp_path,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    report = json.loads((tmp_path / "elsewhere" / "report.json").read_text())
    assert report["config"]["seed"] == 9
    assert report["config"]["samples"] == 4


def _strip_wall_time(text: str) -> str:
    raw = json.loads(text)
    raw.pop("wall_time_s")
    return json.dumps(raw, sort_keys=True)


def test_cli_reports_identical_across_runs_and_threads(tmp_path, cli_env):
    path = write_config(
        tmp_path, command="converge", n=2, field="gaussian",
        r_schedule=[0.4, 0.2], samples=3, seed=5, out_dir="unused",
        tolerances={"ratio_low": 1.5, "ratio_high": 3.0},
    )
    texts = []
    for threads, out in (("1", "out1"), ("4", "out2")):
        env = dict(cli_env)
        env["PWAFFINE_THREADS"] = threads
        proc = run_cli(["converge", "--config", str(path), "--out", out],
                       env=env, cwd=tmp_path)
        assert proc.returncode == EXIT_OK, proc.stderr
        texts.append((tmp_path / out / "report.json").read_text())
    assert _strip_wall_time(texts[0]) == _strip_wall_time(texts[1])

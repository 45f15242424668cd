import csv
import json
import math

import numpy as np
import pytest

from chemolab import cli
from chemolab.config import parse_config, parse_sweep
from chemolab.harness import CSV_COLUMNS, render_report, run_scenario, run_sweep, verify_suite

BASE = """
seed = 5
[grid]
dim = 2
points_per_axis = 64
[params]
xi1 = 1
xi2 = 1
lambda1 = 1
lambda2 = 1
l = 1.5
m = 2
[ctrl]
t_end = 0.2
dt = 0.01
[initial]
width = 1.5
[output]
cadence_steps = 3
[verify]
samples = 8
time_points = 24
"""


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_run_scenario_writes_csv_and_sidecar(tmp_path):
    res = run_scenario(parse_config(BASE), tmp_path)
    cols, data = read_csv(tmp_path / "trace.csv")
    assert tuple(cols) == CSV_COLUMNS
    assert len(data) == res.trace.steps // 3 + 1 == 7
    meta = json.loads((tmp_path / "trace.json").read_text())
    assert {"config", "regime", "status", "versions", "seed"} <= set(meta)
    assert meta["regime"]["tag"] == "BoundedA" and meta["status"] == "Completed"
    assert meta["seed"] == 5 and "blowup_time" not in meta
    assert meta["config"]["params"]["l"] == 1.5


def test_run_scenario_zero_data(tmp_path):
    cfg = parse_config(BASE.replace("[initial]\nwidth = 1.5", '[initial]\nkind = "constant"\namplitude = 0.0'))
    run_scenario(cfg, tmp_path)
    cols, data = read_csv(tmp_path / "trace.csv")
    for name in CSV_COLUMNS[1:]:
        assert np.all(data[:, cols.index(name)] == 0), name


def test_extra_norm_columns_appended(tmp_path):
    cfg = parse_config(BASE.replace("cadence_steps = 3", 'cadence_steps = 3\nnorm_ps = [1, 2, 3, 4, "inf"]'))
    run_scenario(cfg, tmp_path)
    cols, _ = read_csv(tmp_path / "trace.csv")
    assert tuple(cols[: len(CSV_COLUMNS)]) == CSV_COLUMNS and cols[-1] == "u_L3"


def test_csv_bit_identical(tmp_path):
    cfg = parse_config(BASE)
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    assert (tmp_path / "a/trace.csv").read_bytes() == (tmp_path / "b/trace.csv").read_bytes()


def test_blowup_sidecar(tmp_path):
    text = BASE.replace("xi1 = 1", "xi1 = 2").replace("\nl = 1.5\n", "\nl = 1\n").replace("\nm = 2\n", "\nm = 1\n")
    text = text.replace("t_end = 0.2\ndt = 0.01", "t_end = 5.0\ndt = 2e-3\nblowup_mass_fraction = 0.25")
    text = text.replace("width = 1.5", f"width = 0.5\nmass = {1.5 * 8 * math.pi}")
    res = run_scenario(parse_config(text), tmp_path)
    meta = json.loads((tmp_path / "trace.json").read_text())
    assert res.status.kind == meta["status"] == "BlowUp"
    assert 0 < meta["blowup_time"] < 5.0
    assert meta["regime"]["tag"] == "Uncovered"


SWEEP = BASE + """
[sweep]
axes = [{ name = "params.l", values = [0.5, 1.5] }]
expected = ["Uncovered", "BoundedA"]
"""


def test_sweep_matches_and_is_order_invariant(tmp_path):
    spec = parse_sweep(SWEEP)
    rows1, ok1 = run_sweep(spec, 1, tmp_path / "s1")
    rows2, ok2 = run_sweep(spec, 2, tmp_path / "s2")
    assert ok1 and ok2
    assert [r["regime"] for r in rows1] == ["Uncovered", "BoundedA"]
    assert (tmp_path / "s1/summary.csv").read_bytes() == (tmp_path / "s2/summary.csv").read_bytes()
    for i in range(2):
        a = (tmp_path / f"s1/point_{i:03d}/trace.csv").read_bytes()
        assert a == (tmp_path / f"s2/point_{i:03d}/trace.csv").read_bytes()


def test_sweep_mismatch_and_point_errors(tmp_path):
    spec = parse_sweep(SWEEP.replace('["Uncovered", "BoundedA"]', '["BoundedB", "BoundedA"]'))
    rows, ok = run_sweep(spec, 1)
    assert not ok and rows[0]["match"] == "no" and rows[1]["match"] == "yes"
    # an under-resolved grid fails the run, the sweep continues
    spec = parse_sweep(SWEEP.replace("points_per_axis = 64", "points_per_axis = 16").replace("width = 1.5", "width = 0.5"))
    rows, ok = run_sweep(spec, 1)
    assert len(rows) == 2 and any(r["status"].startswith("Error") for r in rows)
    assert not ok


def test_sweep_empty_axes(tmp_path):
    rows, ok = run_sweep(parse_sweep(BASE + "\n[sweep]\naxes = []\n"), 1)
    assert len(rows) == 1 and ok


@pytest.mark.parametrize("suite", ["resolvent", "semigroup", "gradient_smoothing", "picard", "energy"])
def test_verify_suites_pass(suite, tmp_path):
    report, ok = verify_suite(suite, parse_config(BASE), tmp_path)
    assert ok, report
    saved = json.loads((tmp_path / f"verify_{suite}.json").read_text())
    assert saved["passed"] is True and saved["suite"] == suite


def test_verify_resolvent_lambda_one_64_samples():
    cfg = parse_config(BASE.replace("samples = 8", "samples = 64"))
    report, ok = verify_suite("resolvent", cfg)
    assert ok and report["reports"][0]["sup_ratio"] <= 1


def test_verify_unknown_suite():
    with pytest.raises(ValueError):
        verify_suite("nope", parse_config(BASE))


def test_report_renders(tmp_path):
    run_scenario(parse_config(BASE), tmp_path / "one")
    text = render_report(tmp_path / "one")
    assert "BoundedA" in text and "u_Linf" in text
    assert "one" in render_report(tmp_path)
    assert "no traces" in render_report(tmp_path / "missing")


def test_cli_round_trip(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(BASE)
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r/trace.csv").exists()
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "r"))
    assert cli.main(["report"]) == 0
    assert "BoundedA" in capsys.readouterr().out
    assert cli.main(["verify", "--config", str(cfg), "--suite", "resolvent", "--seed", "9"]) == 0
    assert json.loads((tmp_path / "r/verify_resolvent.json").read_text())["seed"] == 9


def test_cli_sweep_exit_codes(tmp_path):
    good = tmp_path / "s.toml"
    good.write_text(SWEEP)
    assert cli.main(["sweep", "--config", str(good), "--out", str(tmp_path / "o"), "--parallel", "2"]) == 0
    bad = tmp_path / "b.toml"
    bad.write_text(SWEEP.replace('"Uncovered", "BoundedA"', '"BoundedA", "BoundedA"'))
    assert cli.main(["sweep", "--config", str(bad), "--out", str(tmp_path / "o2")]) == 1


def test_cli_config_error(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(BASE.replace("l = 1.5", "l = 1.5\nspeling = 1"))
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert "speling" in capsys.readouterr().err

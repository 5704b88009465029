import csv
import json

import pytest

from robstc import cli


def run(tmp_path, *argv):
    return cli.main(list(argv) + ["--out", str(tmp_path)])


def test_run_short_train(tmp_path, capsys):
    code = run(tmp_path, "run", "--scenario", "train", "--horizon", "30")
    assert code == cli.EXIT_OK
    summary = json.loads((tmp_path / "trace_train_0.json").read_text())
    assert summary["contained"] and summary["violations"] == 0
    assert (tmp_path / "trace_train_0.csv").read_text().startswith("t,x_true_1")
    assert "train[0]" in capsys.readouterr().out


def test_run_not_contained_by_horizon(tmp_path):
    assert run(tmp_path, "run", "--scenario", "train", "--horizon", "2") == cli.EXIT_INVARIANT


def test_run_zero_horizon(tmp_path):
    assert run(tmp_path, "run", "--scenario", "train", "--horizon", "0") == cli.EXIT_OK
    rows = list(csv.reader(open(tmp_path / "trace_train_0.csv")))
    assert len(rows) == 2


def test_run_with_too_coarse_sensor(tmp_path, capsys):
    code = run(tmp_path, "run", "--scenario", "train", "--eps", "0.2")
    assert code == cli.EXIT_HYPOTHESIS
    assert "hypothesis failure" in capsys.readouterr().err


def test_run_nonpositive_dwell_diagnostics(tmp_path, capsys):
    code = run(tmp_path, "run", "--scenario", "train", "--eps", "0.2", "--r-star", "0.5",
               "--allow-infeasible-eps")
    assert code == cli.EXIT_HYPOTHESIS
    assert "NonPositiveDwell" in capsys.readouterr().err
    summary = json.loads((tmp_path / "trace_train_0.json").read_text())
    assert summary["failure"].startswith("NonPositiveDwell")


def test_config_error_exit(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: train\nunknown_key: 3\n")
    assert run(tmp_path, "verify", "--config", str(bad)) == cli.EXIT_CONFIG
    assert run(tmp_path, "verify", "--scenario", "nope") == cli.EXIT_CONFIG
    assert run(tmp_path, "verify", "--alpha", "1.5") == cli.EXIT_CONFIG


def test_verify_train(tmp_path, capsys):
    assert run(tmp_path, "verify", "--scenario", "train") == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "[FAIL] eps_below_eps_min" in out
    assert "[PASS] eps_below_field_requirement" in out
    rep = json.loads((tmp_path / "verify_train.json").read_text())
    assert rep["scenario"] == "train"


def test_verify_exact_sensor(tmp_path, capsys):
    assert run(tmp_path, "verify", "--scenario", "train", "--eps", "0") == cli.EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_field_csv(tmp_path):
    assert run(tmp_path, "field", "--scenario", "train") == cli.EXIT_OK
    rows = list(csv.reader(open(tmp_path / "field_train.csv", encoding="utf-8")))
    assert rows[0] == ["x_1", "eps_bar", "eps0", "eps1", "winning_subset"]
    assert rows[-1][0] == "minimum"
    values = [float(r[1]) for r in rows[1:-1]]
    assert float(rows[-1][1]) == min(values)
    assert 0.06 <= min(values) <= 0.1


def test_field_empty_region_warns(tmp_path, capsys):
    code = run(tmp_path, "field", "--scenario", "train", "--r-star", "0.99", "--eps", "0.001",
               "--config", str(_ic_config(tmp_path)))
    assert code == cli.EXIT_OK
    assert "empty grid" in capsys.readouterr().err


def _ic_config(tmp_path):
    p = tmp_path / "near.yaml"
    # starting next to the setpoint keeps the whole working set inside the core ball
    p.write_text("scenario: train\ninitial_conditions: [[30.0]]\nr: 1.0\n")
    return p


def test_env_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "--scenario", "train", "--horizon", "0"]) == cli.EXIT_OK
    assert (tmp_path / "env" / "trace_train_0.csv").exists()


def test_report_lists_runs(tmp_path, capsys):
    run(tmp_path, "run", "--scenario", "train", "--horizon", "0")
    capsys.readouterr()
    assert run(tmp_path, "report") == cli.EXIT_OK
    assert "train_0" in capsys.readouterr().out


def test_exactly_one_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])


@pytest.mark.slow
def test_reproduce_bounds_only(tmp_path, capsys):
    code = run(tmp_path, "reproduce", "--skip-sim")
    rows = json.loads((tmp_path / "reproduce.json").read_text())["rows"]
    by = {(r["scenario"], r["quantity"]): r for r in rows}
    assert by[("train", "eps_min")]["passed"]
    assert by[("cubic3d", "r_tilde")]["passed"]
    # the stored case-study numbers for the other two sensor bounds are not reproduced
    assert code == (cli.EXIT_OK if all(r["passed"] is not False for r in rows)
                    else cli.EXIT_MISMATCH)


def test_cubic_coarse_field_is_fast(tmp_path):
    import time
    t0 = time.perf_counter()
    assert run(tmp_path, "field", "--scenario", "cubic3d", "--grid", "21") == cli.EXIT_OK
    assert time.perf_counter() - t0 < 60
    rows = list(csv.reader(open(tmp_path / "field_cubic3d.csv", encoding="utf-8")))
    assert rows[0][:3] == ["x_1", "x_2", "x_3"]
    assert all(float(r[3]) > 0 for r in rows[1:-1])

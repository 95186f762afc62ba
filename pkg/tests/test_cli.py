import json

import numpy as np

from curemix.cli import main
from curemix.dataio import read_dataset, write_dataset
from curemix import Dataset


def run_cli(*args):
    return main(list(args))


def test_simulate_then_fit_round_trip(tmp_path):
    sim_dir = tmp_path / "sim"
    code = run_cli("simulate", "--n", "250", "--cure-rate", "high",
                   "--mechanism", "diagnostic", "--seed", "7",
                   "--out", str(sim_dir))
    assert code == 0
    assert (sim_dir / "dataset.csv").exists()
    assert (sim_dir / "truth.csv").exists()
    summary = json.loads((sim_dir / "summary.json").read_text())
    assert abs(summary["realized"]["cure_rate"] - 0.30) < 0.08
    assert "run_config" in summary

    fit_dir = tmp_path / "fit"
    code = run_cli("fit", "--input", str(sim_dir / "dataset.csv"),
                   "--mechanism", "diagnostic", "--latency", "weibull",
                   "--out", str(fit_dir), "--seed", "1")
    assert code == 0
    payload = json.loads((fit_dir / "fit.json").read_text())
    assert payload["converged"] is True
    assert "beta0" in payload["coefficients"]
    assert (fit_dir / "coefficients.csv").exists()


def test_simulate_deterministic_bytes(tmp_path):
    out = tmp_path / "a"
    run_cli("simulate", "--n", "150", "--seed", "9", "--out", str(out))
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    run_cli("simulate", "--n", "150", "--seed", "9", "--out", str(out))
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_simulate_ordering_dominance_recorded(tmp_path):
    out = tmp_path / "s"
    code = run_cli("simulate", "--n", "120", "--ordering", "lower",
                   "--seed", "3", "--out", str(out))
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["dominance_check"] == "passed"


def test_fit_missing_status_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,x1\n1.0,0.5\n", encoding="utf-8")
    code = run_cli("fit", "--input", str(bad), "--mechanism", "cutoff")
    assert code == 1
    assert "status" in capsys.readouterr().err


def test_fit_bad_value_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,status\n1.0,1\noops,0\n", encoding="utf-8")
    code = run_cli("fit", "--input", str(bad), "--mechanism", "cutoff")
    assert code == 1
    err = capsys.readouterr().err
    assert ":3:" in err and "time" in err


def test_fit_nonconvergence_exit_code(tmp_path):
    sim_dir = tmp_path / "sim"
    run_cli("simulate", "--n", "200", "--mechanism", "diagnostic",
            "--seed", "4", "--out", str(sim_dir))
    fit_dir = tmp_path / "fit"
    code = run_cli("fit", "--input", str(sim_dir / "dataset.csv"),
                   "--mechanism", "diagnostic", "--latency", "weibull",
                   "--max-iter", "1", "--param-tol", "1e-14",
                   "--loglik-tol", "1e-14", "--out", str(fit_dir))
    assert code == 2
    payload = json.loads((fit_dir / "fit.json").read_text())
    assert payload["converged"] is False


def test_cutoff_fit_equals_ignore_strategy(tmp_path):
    # no known-cured rows: the cutoff mechanism and the ignore strategy
    # produce identical coefficient files
    sim_dir = tmp_path / "sim"
    run_cli("simulate", "--n", "150", "--mechanism", "diagnostic",
            "--target-known-cured", "0.0", "--seed", "6", "--out",
            str(sim_dir))
    data = read_dataset(sim_dir / "dataset.csv")
    assert not np.any(data.known_cured)
    a, b = tmp_path / "fa", tmp_path / "fb"
    run_cli("fit", "--input", str(sim_dir / "dataset.csv"), "--mechanism",
            "cutoff", "--latency", "weibull", "--out", str(a))
    run_cli("fit", "--input", str(sim_dir / "dataset.csv"), "--mechanism",
            "cutoff", "--latency", "weibull", "--strategy", "ignore",
            "--out", str(b))
    ca = json.loads((a / "fit.json").read_text())["coefficients"]
    cb = json.loads((b / "fit.json").read_text())["coefficients"]
    assert ca == cb


def test_fit_recovers_high_cure_incidence_intercept(tmp_path):
    # diagnostic-mechanism variant of the high-cure scenario at n=500:
    # the fitted incidence intercept lands in the reference band
    sim_dir = tmp_path / "sim"
    run_cli("simulate", "--n", "500", "--cure-rate", "high", "--mechanism",
            "diagnostic", "--seed", "16", "--out", str(sim_dir))
    fit_dir = tmp_path / "fit"
    code = run_cli("fit", "--input", str(sim_dir / "dataset.csv"),
                   "--mechanism", "diagnostic", "--latency", "weibull",
                   "--out", str(fit_dir))
    assert code == 0
    payload = json.loads((fit_dir / "fit.json").read_text())
    assert abs(payload["coefficients"]["beta0"] - 2.21) <= 0.3


def test_replicate_study_outputs(tmp_path):
    out = tmp_path / "study"
    code = run_cli("replicate-study", "--n", "120", "--mechanism",
                   "diagnostic", "--replicates", "2", "--bootstrap", "2",
                   "--strategies", "full,ignore", "--seed", "2",
                   "--out", str(out))
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report["strategies"]) == {"full", "ignore"}
    long_lines = [l for l in (out / "long.csv").read_text().splitlines()
                  if l and not l.startswith("#")]
    # header + 2 replicates x 2 strategies x 9 coefficients
    assert len(long_lines) == 1 + 2 * 2 * 9
    report_lines = [l for l in (out / "report.csv").read_text().splitlines()
                    if l and not l.startswith("#")]
    assert len(report_lines) == 1 + 2 * 9


def test_compare_strategies_single_replicate_cp(tmp_path):
    out = tmp_path / "cmp"
    code = run_cli("compare-strategies", "--n", "120", "--mechanism",
                   "diagnostic", "--replicates", "1", "--bootstrap", "2",
                   "--strategies", "full,crude", "--seed", "3",
                   "--out", str(out))
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    cps = [row["cp"] for row in report["rows"] if row["cp"] == row["cp"]]
    assert set(cps) <= {0.0, 100.0}


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 130, "seed": 5, "mechanism": "diagnostic"}),
                   encoding="utf-8")
    out1 = tmp_path / "o1"
    code = run_cli("simulate", "--config", str(cfg), "--out", str(out1))
    assert code == 0
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["run_config"]["n"] == 130
    # explicit flag beats the config value
    out2 = tmp_path / "o2"
    run_cli("simulate", "--config", str(cfg), "--n", "140", "--out", str(out2))
    summary2 = json.loads((out2 / "summary.json").read_text())
    assert summary2["run_config"]["n"] == 140


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}), encoding="utf-8")
    code = run_cli("simulate", "--config", str(cfg))
    assert code == 1
    assert "bogus" in capsys.readouterr().err


def test_dataset_io_round_trip(tmp_path):
    d = Dataset(time=[1.0, 2.5], status=[1, 2], x=[[0.1], [0.2]],
                z=[[1.0], [0.0]], q=[[3.0], [4.0]])
    path = tmp_path / "d.csv"
    write_dataset(path, d, provenance={"seed": 1})
    back = read_dataset(path)
    assert np.array_equal(back.time, d.time)
    assert np.array_equal(back.status, d.status)
    assert np.array_equal(back.x, d.x)
    assert np.array_equal(back.q, d.q)
    assert back.x_names == ("x1",) and back.q_names == ("q1",)

"""Command line behavior: envelope schema, determinism, parameter
resolution order, delimited and figure outputs, and error reporting."""

import json

import pytest

from rdslab import __version__
from rdslab.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _report(capsys, *argv):
    code, out, err = _run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_envelope_fields(capsys):
    rep = _report(capsys, "cocycle-check", "--s", "0.25", "--t", "0.5",
                  "--seed", "3")
    assert rep["schema"] == 1
    assert rep["tool"] == "rdslab"
    assert rep["version"] == __version__
    assert rep["command"] == "cocycle-check"
    assert rep["seed"] == 3
    assert rep["params"]["s"] == "0.25"
    assert "epoch" not in rep
    assert rep["result"]["max_deviation"] == 0.0


def test_reports_are_byte_identical(tmp_path, capsys):
    out = tmp_path / "rep.json"
    argv = ["sync", "--system", "circlemap", "--T", "50", "--trials", "5",
            "--seed", "11", "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first
    assert json.loads(first)["result"]["trials"] == 5
    capsys.readouterr()


def test_seed_resolution_order(capsys, monkeypatch):
    monkeypatch.delenv("RDS_SEED", raising=False)
    rep = _report(capsys, "cocycle-check", "--s", "0.25", "--t", "0.25")
    assert rep["seed"] == 0
    monkeypatch.setenv("RDS_SEED", "41")
    rep = _report(capsys, "cocycle-check", "--s", "0.25", "--t", "0.25")
    assert rep["seed"] == 41
    rep = _report(capsys, "cocycle-check", "--s", "0.25", "--t", "0.25",
                  "--seed", "5")
    assert rep["seed"] == 5
    monkeypatch.setenv("RDS_SEED", "many")
    code, _, err = _run(capsys, "cocycle-check", "--s", "0.25", "--t", "0.25")
    assert code == 2
    assert err.startswith("error:")


def test_epoch_is_opt_in(capsys):
    rep = _report(capsys, "cocycle-check", "--s", "0.25", "--t", "0.25",
                  "--epoch", "1700000000")
    assert rep["epoch"] == 1700000000


def test_usage_errors_are_single_line(capsys):
    code, _, err = _run(capsys, "sync", "--no-such-flag")
    assert code == 2
    assert err.startswith("error:")
    assert err.strip().count("\n") == 0
    code, _, err = _run(capsys, "lyapunov", "--T", "30", "--k", "7",
                        "--noise", "zero")
    assert code == 2
    assert err.startswith("error:")
    code, _, err = _run(capsys, "sync", "--pair", "1,0", "--T", "1",
                        "--trials", "2")
    assert code == 2
    code, _, err = _run(capsys, "lyapunov", "--T", "20.0004")
    assert code == 2


def test_negative_vectors_parse(capsys):
    rep = _report(capsys, "sync", "--pair", "-1,0:1,0", "--T", "2",
                  "--trials", "4", "--seed", "2")
    assert rep["result"]["pairs"] == [[[-1.0, 0.0], [1.0, 0.0]]]


def test_version_flag(capsys):
    code, out, _ = _run(capsys, "--version")
    assert code == 0
    assert out.strip() == __version__


def test_config_defaults_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sync defaults\ntrials = 4\nT = 3.0\nseed = 9\n")
    rep = _report(capsys, "sync", "--system", "circlemap",
                  "--config", str(cfg))
    assert rep["params"]["trials"] == 4
    assert rep["params"]["T"] == 3.0
    assert rep["seed"] == 9
    rep = _report(capsys, "sync", "--system", "circlemap",
                  "--config", str(cfg), "--trials", "6")
    assert rep["params"]["trials"] == 6
    assert rep["params"]["T"] == 3.0


def test_config_repeatable_keys_append(tmp_path, capsys):
    cfg = tmp_path / "pairs.cfg"
    cfg.write_text("pair=-1,0:1,0\npair=0,1:0,-1\n")
    rep = _report(capsys, "sync", "--T", "1", "--trials", "2",
                  "--config", str(cfg))
    assert len(rep["result"]["freqs"]) == 2


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("volume=11\n")
    code, _, err = _run(capsys, "sync", "--config", str(cfg))
    assert code == 2 and "volume" in err
    cfg.write_text("trials=4\ntrials=6\n")
    code, _, err = _run(capsys, "sync", "--config", str(cfg))
    assert code == 2
    cfg.write_text("no separator here\n")
    code, _, err = _run(capsys, "sync", "--config", str(cfg))
    assert code == 2
    code, _, err = _run(capsys, "sync", "--config", str(tmp_path / "nope"))
    assert code == 2


def test_noise_stats_result_and_csv(tmp_path, capsys):
    csv = tmp_path / "path.csv"
    rep = _report(capsys, "noise-stats", "--d", "2", "--dt", "0.01",
                  "--T", "5", "--seed", "8", "--csv", str(csv))
    result = rep["result"]
    assert result["n_cells"] == 500
    assert all(abs(z) < 4.0 for z in result["mean_z"])
    assert all(0.8 < r < 1.2 for r in result["var_ratio"])
    assert result["shift_law_dev"] == 0.0
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "t,w_1,w_2"
    assert len(lines) == 502
    float(lines[1].split(",")[1])


def test_stability_csv_and_figures(tmp_path, capsys):
    figdir = tmp_path / "figs"
    csv = tmp_path / "diam.csv"
    rep = _report(capsys, "stability", "--system", "circlemap", "--x", "2.0",
                  "--r", "0.1", "--T", "200", "--trials", "6", "--seed", "13",
                  "--csv", str(csv), "--figdir", str(figdir))
    assert rep["result"]["trials"] == 6
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "trial,diameter"
    assert len(lines) == 7
    pngs = list(figdir.glob("*.png"))
    assert pngs


def test_steer_cli_trace(tmp_path, capsys):
    csv = tmp_path / "trace.csv"
    rep = _report(capsys, "steer", "--kind", "transit", "--x", "0,0",
                  "--y", "0,1", "--eta0", "100", "--csv", str(csv))
    assert rep["result"]["verdict"]["final_error"] < 0.05
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "t,x_1,x_2"
    assert len(lines) == 12


def test_pullback_cloud_mode(tmp_path, capsys):
    csv = tmp_path / "cloud.csv"
    rep = _report(capsys, "pullback", "--system", "circlemap", "--T", "200",
                  "--m", "25", "--seed", "4", "--csv", str(csv))
    result = rep["result"]
    assert len(result["atoms"]) == 25
    assert result["cloud_diameter"] > 1.0
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "atom,x_1"
    assert len(lines) == 26


def test_pullback_convergence_table(capsys):
    rep = _report(capsys, "pullback", "--system", "circlemap",
                  "--T-list", "50,100", "--m", "20", "--seed", "4")
    rows = rep["result"]["rows"]
    assert [r["T"] for r in rows] == [100.0]
    assert rows[0]["dist"] >= 0.0


def test_pullback_many_realizations(capsys):
    rep = _report(capsys, "pullback", "--system", "circlemap",
                  "--T-list", "50,100", "--m", "20", "--trials", "3",
                  "--seed", "4")
    assert len(rep["result"]["dists"]) == 3
    assert rep["result"]["max_dist"] >= rep["result"]["median_dist"]
    code, _, err = _run(capsys, "pullback", "--system", "circlemap",
                        "--T-list", "50,100,200", "--m", "20",
                        "--trials", "3")
    assert code == 2 and "two horizons" in err


def test_clusters_cli_finds_both_arcs(tmp_path, capsys):
    csv = tmp_path / "clouds.csv"
    rep = _report(capsys, "clusters", "--system", "circlemap", "--T", "300",
                  "--m", "20", "--trials", "9", "--seed", "6",
                  "--csv", str(csv))
    result = rep["result"]
    assert result["n_hat_cloud"] == 2
    assert result["vote_fraction"] >= 0.9
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "trial,atom,x_1"
    assert len(lines) == 1 + 9 * 20


def test_cli_rejects_bad_system_parameters(capsys):
    code, _, err = _run(capsys, "lyapunov", "--system", "circlemap",
                        "--eps-c", "0.8", "--T", "30")
    assert code == 2
    assert err.startswith("error:")

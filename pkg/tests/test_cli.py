import json
import os

import numpy as np
import pytest

from coevo import __version__, cli, integrate as I, scenarios as S
from coevo.models import Gompertz, HeavisideShift, Logistic, SymmetricBimodal


def test_parse_scenario_example():
    cfg = cli.parse_config(["scenario", "fig2", "--t-max", "1e4", "--seed", "42"])
    assert cfg.command == "scenario" and cfg.scenario == "fig2"
    assert cfg.params.t_max == 1e4 and cfg.params.seed == 42 and cfg.seed == 42
    assert cfg.params.theta == 0.5          # preset value kept


def test_parse_simulate_model_flags():
    cfg = cli.parse_config(["simulate", "--model", "gompertz", "--K", "2", "--env", "symmetric",
                            "--m", "0.7", "--lambda", "3", "--coupling", "heaviside"])
    assert cfg.model == Gompertz(2.0) and cfg.env == SymmetricBimodal(0.7)
    assert cfg.params.lam == 3.0 and cfg.rule == HeavisideShift(0.0)


def test_invalid_theta_exits_2(capsys):
    assert cli.main(["simulate", "--theta", "-1"]) == 2
    assert "theta" in capsys.readouterr().err


def test_empty_argv_prints_usage(capsys):
    assert cli.main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_preset_exits_2(capsys):
    assert cli.main(["scenario", "nope"]) == 2
    assert "fig1a" in capsys.readouterr().err


def test_help_lists_every_flag(capsys):
    assert cli.main(["simulate", "--help"]) == 0
    out = capsys.readouterr().out
    for flag in ("--theta", "--gamma", "--lambda", "--K", "--dt", "--t-max", "--seed", "--x0", "--y0",
                 "--record-stride", "--bins", "--range", "--out", "--format"):
        assert flag in out
    assert "default" in out and "1/time" in out


def test_config_file(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\ntheta = 0.2\nt_max = 5\nseed = 7\nlambda = 2\n", encoding="utf-8")
    cfg = cli.parse_config(["simulate", "--config", str(cfg_file), "--seed", "9"])
    assert cfg.params.theta == 0.2 and cfg.params.t_max == 5.0 and cfg.params.lam == 2.0
    assert cfg.params.seed == 9         # flag overrides the file


@pytest.mark.parametrize("text,key", [("colour = red\n", "colour"), ("seed = abc\n", "seed"),
                                      ("theta = -3\n", "theta"), ("dt = 0.5\n", "dt")])
def test_config_file_errors_name_key(tmp_path, capsys, text, key):
    f = tmp_path / "bad.cfg"
    f.write_text(text, encoding="utf-8")
    assert cli.main(["simulate", "--config", str(f)]) == 2
    assert key in capsys.readouterr().err


def test_bad_format_and_range(capsys):
    assert cli.main(["simulate", "--format", "png"]) == 2
    assert cli.main(["simulate", "--range", "4,1"]) == 2
    err = capsys.readouterr().err
    assert "format" in err and "range" in err


# ---------------------------------------------------------------------------
# emission


@pytest.fixture(scope="module")
def short_fig1a():
    return S.run_scenario(S.preset("fig1a").with_overrides(t_max=20.0))


def test_emit_manifest(tmp_path, short_fig1a):
    written = cli.emit(short_fig1a, cli.FORMATS, str(tmp_path))
    names = {os.path.basename(p) for p in written}
    assert {"fig1a.csv", "fig1a.json", "fig1a.svg", "fig1a_comparison.csv"} <= names
    assert sum(n.startswith("fig1a_run") for n in names) == 9
    assert all(os.path.exists(p) for p in written)
    svg = (tmp_path / "fig1a.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 3


def test_csv_round_trip_is_exact(tmp_path, short_fig1a):
    cli.emit(short_fig1a, ("csv",), str(tmp_path))
    cols = cli.read_csv(tmp_path / "fig1a.csv")
    assert list(cols) == ["t", "x", "y"]
    tr = short_fig1a.trajectories[0]
    for key, arr in (("t", tr.times), ("x", tr.xs), ("y", tr.ys)):
        assert cols[key].tobytes() == arr.tobytes()


def test_histogram_csv_integrates_to_one(tmp_path):
    rep = S.run_scenario(S.preset("fig2").with_overrides(t_max=500.0))
    cli.emit(rep, ("csv", "json"), str(tmp_path))
    h = cli.read_csv(tmp_path / "fig2_histogram.csv")
    assert list(h) == ["bin_lo", "bin_hi", "empirical", "theoretical"]
    w = h["bin_hi"] - h["bin_lo"]
    assert abs(np.sum(h["empirical"] * w) - 1.0) < 1e-12
    doc = json.loads((tmp_path / "fig2.json").read_text())
    assert doc["histogram"]["empirical"] == h["empirical"].tolist()


def test_json_reproduces_run_bit_exactly(tmp_path):
    spec = S.preset("fig3-coupled").with_overrides(t_max=5.0, seed=11)
    rep = S.run_scenario(spec)
    cli.emit(rep, ("json",), str(tmp_path))
    doc = json.loads((tmp_path / "fig3-coupled.json").read_text())
    assert doc["version"] == __version__
    assert doc["scenario"]["params"]["seed"] == 11
    again = S.run_scenario(S.ScenarioSpec.from_dict(doc["scenario"]))
    assert again.trajectories[0].xs.tobytes() == rep.trajectories[0].xs.tobytes()
    assert doc["trajectories"][0]["xs"] == rep.trajectories[0].xs.tolist()


def test_emit_trajectory(tmp_path):
    traj = I.simulate(Logistic(1.0), SymmetricBimodal(0.5), HeavisideShift(0.0),
                      I.SimParams(theta=0.01, t_max=1.0))
    written = cli.emit(traj, ("csv", "json", "svg"), str(tmp_path), "run")
    assert [os.path.basename(p) for p in written] == ["run.csv", "run.json", "run.svg"]
    meta = json.loads((tmp_path / "run.json").read_text())["trajectories"][0]["metadata"]
    assert meta["params"]["theta"] == 0.01 and meta["env"]["kind"] == "symmetric_bimodal"


# ---------------------------------------------------------------------------
# end to end


def test_io_error_exits_3(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["simulate", "--t-max", "1", "--out", str(blocker)]) == 3
    assert "I/O" in capsys.readouterr().err


def test_same_seed_gives_identical_csv(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["simulate", "--theta", "0.1", "--t-max", "5", "--seed", "3",
                         "--out", str(tmp_path / d), "--format", "csv"]) == 0
    assert (tmp_path / "a" / "simulate.csv").read_bytes() == (tmp_path / "b" / "simulate.csv").read_bytes()
    cli.main(["simulate", "--theta", "0.1", "--t-max", "5", "--seed", "4", "--out", str(tmp_path / "c"),
              "--format", "csv"])
    assert (tmp_path / "a" / "simulate.csv").read_bytes() != (tmp_path / "c" / "simulate.csv").read_bytes()


def test_scenario_command(tmp_path, capsys):
    assert cli.main(["scenario", "fig2", "--t-max", "300", "--bins", "20", "--out", str(tmp_path)]) == 0
    h = cli.read_csv(tmp_path / "fig2_histogram.csv")
    assert h["bin_lo"].size == 20
    doc = json.loads((tmp_path / "fig2.json").read_text())
    assert doc["summary"]["l1_distance"] == doc["histogram"]["l1_distance"]
    assert "l1_distance" in capsys.readouterr().out


def test_run_too_short_for_detector_exits_2(tmp_path, capsys):
    assert cli.main(["scenario", "fig3", "--t-max", "2", "--out", str(tmp_path)]) == 2
    assert "window" in capsys.readouterr().err


def test_verify_command(tmp_path, capsys):
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 20
    rows = json.loads((tmp_path / "verify.json").read_text())
    assert all(r["passed"] for r in rows)
    assert (tmp_path / "verify.csv").read_text().startswith("check,value,threshold,passed")


def test_verify_failure_exits_4(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "run_checks", lambda: [("dummy", 1.0, 0.5, False)])
    assert cli.main(["verify", "--out", str(tmp_path)]) == 4


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "coevo", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout

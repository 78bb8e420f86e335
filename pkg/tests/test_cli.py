import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import CSTAR_ORACLE
from stefankpp import cli


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_cstar(tmp_path, capsys):
    out = tmp_path / "c"
    assert cli.main(["cstar", "--out", str(out)]) == cli.EXIT_OK
    assert f"c_star={CSTAR_ORACLE:.9f}"[:15] in capsys.readouterr().out
    man = manifest(out)
    assert man["status"] == "ok" and man["exit_code"] == 0 and "profile.csv" in man["outputs"]
    assert man["summary"]["c_star"] == pytest.approx(CSTAR_ORACLE, abs=1e-9)
    assert man["defaults"]  # resolved defaults recorded


def test_bad_inputs_exit_one(tmp_path):
    assert cli.main(["cstar", "--mu", "-1", "--out", str(tmp_path / "a")]) == cli.EXIT_CONFIG
    assert manifest(tmp_path / "a")["status"] == "error"
    assert cli.main(["cstar", "--tol", "0", "--out", str(tmp_path / "b")]) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        cli.main(["cstar", "--bogus"])
    assert info.value.code == cli.EXIT_CONFIG
    assert cli.main(["run", "fb1d", str(tmp_path / "missing.cfg"),
                     "--out", str(tmp_path / "m")]) == cli.EXIT_CONFIG
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["plotdata", str(empty)]) == cli.EXIT_CONFIG


def test_semiwave_out_of_range(tmp_path):
    assert cli.main(["semiwave", "--k", "0.5", "--out", str(tmp_path / "ok")]) == 0
    assert cli.main(["semiwave", "--k", "3", "--out", str(tmp_path / "bad")]) == cli.EXIT_CONFIG


def test_fb1d_run_and_plotdata(tmp_path):
    cfg = tmp_path / "front.cfg"
    cfg.write_text("T = 6\nL = 40\nh = 0.1\noutput_dt = 0.1\norientation = eqlow\n")
    out = tmp_path / "front_out"  # default: next to the config
    assert cli.main(["run", "fb1d", str(cfg)]) == 0
    man = manifest(out)
    assert {"trajectory.csv", "final_profile.csv"} <= set(man["outputs"])
    assert man["summary"]["speed"] < 0
    assert cli.main(["plotdata", str(out)]) == 0
    rows = np.loadtxt(out / "plots" / "rho_vs_pred.csv", delimiter=",", skiprows=1)
    assert rows.shape[1] == 3
    assert manifest(out)["subcommand"] == "run fb1d"  # run manifest untouched


def test_cone_run_deterministic_and_overlay(tmp_path):
    cfg = tmp_path / "cone.cfg"
    cfg.write_text("shape = cone\nphi = 3*pi/4\nbox = -6, 6, -8, 4\nhx = 0.2\nT = 1\n"
                   "snap_every = 0.5\nmargin_cells = 2\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "cone2d", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["run", "cone2d", str(cfg), "--out", str(b)]) == 0
    for name in manifest(a)["outputs"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert cli.main(["plotdata", str(a)]) == 0
    assert list((a / "plots").glob("overlay_*.csv"))


def test_margin_violation_exit_three(tmp_path):
    cfg = tmp_path / "ball.cfg"
    cfg.write_text("shape = ball\nbox = -3, 3\ncenter = 0\nradius = 1.5\nhx = 0.1\nT = 20\n"
                   "snap_every = 0.5\n")
    out = tmp_path / "o"
    assert cli.main(["run", "cone2d", str(cfg), "--out", str(out)]) == cli.EXIT_MARGIN
    man = manifest(out)
    assert man["partial"] and man["outputs"]


def test_verify_commands(tmp_path):
    out = tmp_path / "v"
    assert cli.main(["verify", "super", "--samples", "500", "--out", str(out)]) == 0
    assert "ok=true" in (out / "report.txt").read_text()
    assert cli.main(["verify", "super", "--R", "5", "--out", str(tmp_path / "w")]) == cli.EXIT_SOLVER
    assert cli.main(["verify", "sub1d", "--samples", "500", "--out", str(tmp_path / "s")]) == 0
    assert cli.main(["verify", "compare", "--case", "identical",
                     "--out", str(tmp_path / "c")]) == 0


def test_radial_runs(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("T = 2\nh = 0.1\noutput_dt = 0.05\n")
    assert cli.main(["run", "radial-in", str(cfg), "--out", str(tmp_path / "i")]) == 0
    cfg.write_text("T = 2\nR0 = 4\nh = 0.1\noutput_dt = 0.05\n")
    assert cli.main(["run", "radial-out", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "stefankpp.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()

import csv
import subprocess
import sys

import numpy as np
import pytest

import pghd.cli as cli
from pghd.experiments import CSV_COLUMNS
from pghd.fields import Grid, ScalarField3
from pghd.snapshot import read_snapshot, write_snapshot

SMALL = """\
[domain]
nx = 8
ny = 8
nz = 4

[init]
T0 = random(1, 0.1, 2)

[time]
dt = 1e-3
t_end = 0.01

[output]
snapshot_every = 5
"""


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_run_writes_diagnostics_and_snapshots(small_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["run", str(small_config), "--out", str(out)]) == 0
    assert "finished 10 steps" in capsys.readouterr().out
    with open(out / "diagnostics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CSV_COLUMNS)
    assert ",".join(rows[0]) == "t,l2_sq,v2_sq,surface_l2,adv_energy,source_power,bl_grad"
    assert len(rows) == 12
    assert all(np.isfinite(float(v)) for v in rows[-1])
    assert sorted(p.name for p in out.glob("T_*.pghd")) == ["T_000000.pghd", "T_000005.pghd", "T_000010.pghd", "T_final.pghd"]
    final = read_snapshot(out / "T_final.pghd", Grid(8, 8, 4))
    assert np.array_equal(final.values, read_snapshot(out / "T_000010.pghd").values)
    assert (out / "config.ini").read_text() == SMALL


def test_diag_on_a_finished_run(small_config, tmp_path, capsys):
    out = tmp_path / "run"
    cli.main(["run", str(small_config), "--out", str(out)])
    capsys.readouterr()
    assert cli.main(["diag", str(out), "--C0", "0.6", "--C2", "1", "--C", "1"]) == 0
    text = capsys.readouterr().out
    for key in ("R_tilde_a", "R_a", "lambda_1", "dimension bound", "final |T|^2"):
        assert key in text


def test_diag_needs_a_run_directory(tmp_path, capsys):
    assert cli.main(["diag", str(tmp_path), "--C0", "1"]) == 1
    assert "config error" in capsys.readouterr().err


def test_cfl_violation_exits_with_usage_code(tmp_path, capsys):
    p = tmp_path / "fast.ini"
    p.write_text(SMALL.replace("dt = 1e-3", "dt = 5.0").replace("t_end = 0.01", "t_end = 10")
                 .replace("random(1, 0.1, 2)", "random(1, 50, 0)"))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "CFL violation" in capsys.readouterr().err


def test_nan_initial_state_is_a_numerical_failure(tmp_path, capsys):
    g = Grid(8, 8, 4)
    vals = np.zeros(g.shape)
    vals[3, 3, 1] = np.nan
    write_snapshot(ScalarField3(g, vals), tmp_path / "bad.pghd")
    p = tmp_path / "nan.ini"
    p.write_text(SMALL.replace("random(1, 0.1, 2)", "file:bad.pghd"))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_verify_passes_on_a_small_box(small_config, capsys):
    assert cli.main(["verify", str(small_config)]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_failed_verification_exits_3(small_config, monkeypatch, capsys):
    from pghd import experiments as ex

    real = ex.verify_suite

    def broken(cfg):
        checks = real(cfg)
        checks[0].passed = False
        return checks

    monkeypatch.setattr(cli.ex, "verify_suite", broken)
    assert cli.main(["verify", str(small_config)]) == 3
    assert "FAILED" in capsys.readouterr().out


def test_eig_report_and_export(small_config, tmp_path, capsys):
    assert cli.main(["eig", str(small_config), "--modes", "12", "--export", str(tmp_path / "b")]) == 0
    text = capsys.readouterr().out
    assert "growth constant" in text and "basis written" in text
    assert len(list((tmp_path / "b").glob("mode_*.pghd"))) == 12
    assert cli.main(["eig", str(small_config), "--modes", "0"]) == 1


def test_mms_refuses_wall_bounded_config(small_config, capsys):
    assert cli.main(["mms", str(small_config)]) == 1
    assert "periodic_test" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["run"], ["run", "no-such-preset"], ["diag", "x"], ["mms", "periodic", "--levels", "1"]],
)
def test_usage_errors_exit_1(argv, capsys):
    assert cli.main(argv) == 1
    assert capsys.readouterr().err


def test_config_errors_are_listed(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[physics]\nepsilon = -1\nmu = 0\n")
    assert cli.main(["run", str(p)]) == 1
    err = capsys.readouterr().err.splitlines()
    assert any("[physics].epsilon" in e for e in err) and any("[physics].mu" in e for e in err)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pghd", "--help"], capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0 and "verify" in r.stdout

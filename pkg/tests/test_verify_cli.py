from __future__ import annotations

import math

import numpy as np
import pytest

from vel import cli, io
from vel import dynamics as D
from vel import verify
from vel.errors import ConfigError, LevelsTooFew
from vel.grid_norms import Grid
from vel.thermo import GasParams


# ---------------------------------------------------------------- config and CSV
def test_config_round_trip(tmp_path):
    sc = verify.Scenario("manufactured_1d", gamma=1.4, n=32, seed=7, t_final=0.25)
    path = tmp_path / "a.cfg"
    io.write_config(sc.to_config(), path)
    assert verify.Scenario.from_config(io.read_config(path)) == sc


def test_shipped_configs_parse():
    from pathlib import Path
    for p in sorted(Path(__file__).resolve().parents[1].glob("configs/*.cfg")):
        verify.Scenario.from_config(io.read_config(p))


@pytest.mark.parametrize("text", [
    "[scenario]\nscenario = nowhere\n",
    "[scenario]\ngamma = 1.0\n",
    "[bogus]\nn = 3\n",
    "[grid]\ncolour = red\n",
    "[grid]\nn = many\n",
    "[tolerances]\nr_bound = 0.7\n",
    "[run]\ncfl = -1\n",
    "[scenario]\nk = 3\n",
    "no section header\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        verify.Scenario.from_config(io.read_config(text))


def test_csv_round_trip(tmp_path):
    path = tmp_path / "x.csv"
    io.write_csv(("a", "b", "ok"), [(1, np.float64(0.1), True), (2, 1e-300, np.bool_(False))], path)
    header, rows = io.read_csv(path)
    assert header == ["a", "b", "ok"]
    assert rows == [["1", "0.1", "1"], ["2", "1e-300", "0"]]


def test_csv_row_length_mismatch():
    with pytest.raises(ValueError):
        io.write_csv(("a", "b"), [(1,)])


# ---------------------------------------------------------------- rate tables
def test_rate_table_fourth_order():
    t = verify.RateTable("x", [16, 32, 64], [1.0, 1 / 16, 1 / 256], 4.0)
    np.testing.assert_allclose(t.rates, [4.0, 4.0])
    assert t.fitted == pytest.approx(4.0) and t.ok
    assert len(t.csv_rows()) == 3 and math.isnan(t.csv_rows()[0][3])


def test_rate_table_modes():
    flat = verify.RateTable("c", [16, 32, 64], [1.0, 1.0, 1.0], 0.0)
    assert flat.ok
    assert verify.RateTable("m", [16, 32, 64], [1.0, 1 / 64, 1 / 4096], 4.0, math.inf).ok
    assert not verify.RateTable("x", [16, 32, 64], [1.0, 1 / 4, 1 / 16], 4.0).ok


def test_levels_too_few():
    with pytest.raises(LevelsTooFew):
        verify.convergence_study("perfect_derivative", [32, 64])
    with pytest.raises(ValueError):
        verify.convergence_study("nonsense")


# ---------------------------------------------------------------- runs
def test_zero_perturbation_snapshot_is_zero():
    g = Grid.interval(32, vacuum="both")
    ab = D.manufactured_1d_background(g, GasParams(5 / 3))
    snap = verify.snapshot(ab, D.LinearizedState.zeros(g), 1)
    for v in (snap.E0, snap.H2_sq, snap.E2_wave, snap.E2_transport, snap.omega_hat_sq):
        assert v == 0.0


def _short(seed=3):
    return verify.Scenario("manufactured_1d", n=32, k=1, seed=seed, t_final=0.05, family_size=50)


def test_run_is_deterministic():
    a = verify.run_scenario(_short(), family=False)
    b = verify.run_scenario(_short(), family=False)
    assert a.csv_rows() == b.csv_rows()
    assert a.rows[0]["t"] == 0.0 and a.rows[-1]["t"] == pytest.approx(0.05)


def test_run_flags_hold_on_short_run():
    run = verify.run_scenario(_short(), family=False)
    assert run.ok, run.flags
    assert len(run.columns) == len(run.csv_rows()[0])


# ---------------------------------------------------------------- CLI
def test_cli_order_check(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert cli.main(["order", "check", "--max-m", "2", "--max-l", "2", "--max-k", "1", "--max-i", "2",
                     "--out", str(out)]) == 0
    header, rows = io.read_csv(out)
    assert header[-1] == "pass" and rows and all(r[-1] == "1" for r in rows)


def test_cli_identities(tmp_path):
    out = tmp_path / "i.csv"
    assert cli.main(["identities", "--samples", "50", "--out", str(out)]) == 0
    _, rows = io.read_csv(out)
    names = {r[0] for r in rows}
    assert {"elimination_nonlinear", "elimination_linearized"} <= names


def test_cli_identities_impossible_tolerance(tmp_path):
    assert cli.main(["identities", "--samples", "50", "--tol", "0", "--out", str(tmp_path / "i.csv")]) == 1


def test_cli_library_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\nscenario = nowhere\n")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert "ConfigError" in capsys.readouterr().err
    assert cli.main(["elliptic", "--k", "2"]) == 2


def test_cli_run_writes_csv(tmp_path):
    cfg = tmp_path / "s.cfg"
    io.write_config(_short().to_config(), cfg)
    out = tmp_path / "r.csv"
    assert cli.main(["run", "--config", str(cfg), "--no-family", "--out", str(out)]) == 0
    header, rows = io.read_csv(out)
    assert header[0] == "t" and len(rows) >= 5


def test_cli_convergence(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["convergence", "--test", "perfect_derivative", "--levels", "32,64,128", "--out", str(out)]) == 0
    header, rows = io.read_csv(out)
    assert header == ["test", "level", "error", "rate", "fitted_rate"] and len(rows) == 3

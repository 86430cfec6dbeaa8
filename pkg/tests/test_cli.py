import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polariton_engine import cli


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run(tmp_path, sub, cfg, *extra):
    out = str(tmp_path / "run")
    code = cli.main([sub, "--config", write_config(tmp_path, cfg), "--out", out, *extra])
    return code, out


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6))
def test_float_format_has_twelve_significant_digits(x):
    s = cli.fmt(x)
    assert "," not in s
    assert float(s) == pytest.approx(x, rel=1e-11, abs=1e-300)


def test_spectrum_file_format_and_gap(tmp_path):
    code, out = run(tmp_path, "spectrum", {"spectrum": {"g": 0.1, "n_points": 601}})
    assert code == 0
    raw = open(f"{out}_spectrum.csv", "rb").read()
    assert b"\r" not in raw
    header, data = read_csv(f"{out}_spectrum.csv")
    assert header[:3] == ["delta", "E_2_0", "E_1_0"]
    assert data.shape == (601, len(header))
    gap = data[:, 2] - data[:, 1]
    assert gap.min() == pytest.approx(0.2, abs=1e-10)
    assert data[np.argmin(gap), 0] == 0.0
    two = data[:, header.index("E_phi_plus")] - data[:, header.index("E_phi_minus")]
    assert two.min() == pytest.approx(2 * math.sqrt(2) * 0.1, abs=1e-10)


def test_spectrum_uncoupled_levels_cross(tmp_path):
    code, out = run(tmp_path, "spectrum", {"spectrum": {"g": 0.0, "n_points": 61}})
    assert code == 0
    _, data = read_csv(f"{out}_spectrum.csv")
    omega = 1 + data[:, 0]
    np.testing.assert_allclose(data[:, 1], np.minimum(omega, 1.0), atol=1e-12)
    np.testing.assert_allclose(data[:, 2], np.maximum(omega, 1.0), atol=1e-12)


def test_config_errors_exit_2_without_outputs(tmp_path, capsys):
    cfg = {"engine": {"g": -1, "bogus": 1}, "sweep": {"variable": "temperature", "grid": []}}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 2
    err = capsys.readouterr().err
    assert "bogus" in err and "g must be positive" in err and "grid is empty" in err
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json"]


def test_heat_pump_rejected(tmp_path, capsys):
    code, _ = run(tmp_path, "cycle", {"engine": {"delta_1": 0.2, "delta_2": -0.2}})
    assert code == 2
    assert "heat-pump" in capsys.readouterr().err


def test_unwritable_output_is_config_error(tmp_path):
    path = write_config(tmp_path, {"spectrum": {}})
    assert cli.main(["spectrum", "--config", path, "--out", str(tmp_path / "missing" / "x")]) == 2


def test_runtime_failure_exit_1(tmp_path, monkeypatch):
    def boom(run):
        raise FloatingPointError("non-finite density matrix")
    monkeypatch.setitem(cli.COMMANDS, "spectrum", boom)
    code, out = run(tmp_path, "spectrum", {"spectrum": {}})
    assert code == 1
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cfg.json"]


def test_cycle_report(tmp_path):
    cfg = {"engine": {"delta_1": -0.2, "delta_2": 0.2, "n_bar": 1.0}, "cycle": {"numeric": False}}
    code, out = run(tmp_path, "cycle", cfg)
    assert code == 0
    rep = json.load(open(f"{out}_cycle.json"))
    assert rep["analytic_multi"]["W_tot"] == pytest.approx(-0.25 * 0.2, abs=1e-12)
    assert rep["p_n"][1] == pytest.approx(0.25)
    assert "numeric" not in rep
    cfg["engine"]["n_bar"] = 0.0
    code, out = run(tmp_path, "cycle", cfg)
    rep = json.load(open(f"{out}_cycle.json"))
    for key in ("analytic_single", "analytic_multi", "analytic_two_qubit"):
        assert rep[key]["W_tot"] == 0.0


def test_physical_units_converted_and_echoed(tmp_path):
    cfg = {"physical": {"cavity_ghz": 15.0, "T_f_kelvin": 0.3, "g_mhz": 195.0}, "cycle": {"numeric": False}}
    code, out = run(tmp_path, "cycle", cfg)
    assert code == 0
    rep = json.load(open(f"{out}_cycle.json"))
    assert rep["config"]["physical"]["cavity_ghz"] == 15.0
    assert rep["config"]["n_bar"] == pytest.approx(0.0998, abs=5e-4)
    assert rep["config"]["natural_units"]["g"] == pytest.approx(0.013)


def test_sweep_temperature_and_detuning(tmp_path):
    cfg = {"engine": {"delta_1": -0.2, "delta_2": 0.2}, "sweep": {"variable": "n_bar", "grid": [0.25, 0.5, 1, 2, 4]}}
    code, out = run(tmp_path, "sweep", cfg)
    header, data = read_csv(f"{out}_sweep.csv")
    assert data[np.argmin(data[:, header.index("W_multi_tot")]), 0] == 1.0
    cfg = {"engine": {"delta_1": -0.25, "n_bar": 1.0}, "sweep": {"variable": "delta_2", "grid": [0.15, 0.25, 0.35]}}
    code, out = run(tmp_path, "sweep", cfg)
    header, data = read_csv(f"{out}_sweep.csv")
    W = data[:, header.index("W_multi_tot")]
    assert W[0] < W[1] < W[2]


def test_degenerate_lambda_sweep(tmp_path):
    cfg = {"engine": {"p1": 0.08, "tau": [None, 5e7, 500.0, 5e5]},
           "sweep": {"variable": "lambda", "grid": [0], "n_traj": 1}}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 0
    _, data = read_csv(f"{out}_sweep.csv")
    assert data.shape[0] == 1


TRAJ = {"engine": {"p1": 0.3, "tau": [None, 5e7, 300.0, 5e5]},
        "trajectories": {"scheme": "dispersive", "lambdas": [0, 1e-4, 1e-3], "n_traj": 40}}


def test_trajectory_outputs(tmp_path):
    code, out = run(tmp_path, "trajectories", TRAJ, "--seed", "5")
    assert code == 0
    for tag in ("lam0", "lam0.0001", "lam0.001"):
        header, pw = read_csv(f"{out}_{tag}_pw.csv")
        assert header == ["bin_left", "bin_right", "count", "probability"]
        assert pw[:, 3].sum() == pytest.approx(1.0)
        header, pops = read_csv(f"{out}_{tag}_populations.csv")
        assert header == ["time", "pop_2_0", "pop_1_0", "pop_e_0", "pop_g_1"]
    summary = json.load(open(f"{out}_summary.json"))
    assert summary["seed"] == 5
    assert [r["lambda"] for r in summary["results"]] == [0, 1e-4, 1e-3]


def test_trajectory_outputs_byte_identical_across_threads(tmp_path, monkeypatch):
    cfg = {**TRAJ, "trajectories": {**TRAJ["trajectories"], "lambdas": [1e-3], "n_traj": 600}}
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    path = write_config(tmp_path, cfg)
    assert cli.main(["trajectories", "--config", path, "--out", str(a / "r"), "--threads", "1"]) == 0
    monkeypatch.setenv("ENGINE_THREADS", "3")
    assert cli.main(["trajectories", "--config", path, "--out", str(b / "r")]) == 0
    for name in ("r_populations.csv", "r_pw.csv", "r_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_dt_lambda_precondition_rejected(tmp_path):
    cfg = {"engine": {"dt_sse": 1.0}, "trajectories": {"lambdas": [0.05]}}
    code, _ = run(tmp_path, "trajectories", cfg)
    assert code == 2

import csv
import filecmp
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from bvlab.cli import EXIT_CONFIG, EXIT_OK, main
from bvlab.experiment import ConfigError, ExperimentConfig, emit_plotdata, load_config, run_experiment

GOLDEN = Path(__file__).parent / "golden"


def read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_cfg(tmp_path, **kw):
    d = {"energy": {"builtin": "Elastoplastic1d"}, "alpha": 1.0, "eps": [0.2, 0.1], "tau_ratio": 0.1,
         "T": 1.0, "n_nodes": 100, "output": str(tmp_path / "out")}
    d.update(kw)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(d))
    return p


# ---------------------------------------------------------------- configuration

@given(st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=4, unique=True), st.floats(0.1, 3.0),
       st.sampled_from(["Prototype2dof", "Elastoplastic1d", "DoubleWellJump"]), st.integers(3, 5000),
       st.dictionaries(st.sampled_from(["tol_t", "tol_s", "tol_v", "tol_class"]), st.floats(1e-9, 1.0)))
def test_config_round_trip(eps, alpha, builtin, n_nodes, tol):
    d = {"energy": {"builtin": builtin, "params": {}}, "alpha": alpha, "eps": sorted(eps, reverse=True),
         "tau": 1e-3, "T": 1.0, "output": "x", "n_nodes": n_nodes, "seed": 3, "tolerances": tol}
    cfg = ExperimentConfig.from_dict(d)
    again = ExperimentConfig.from_dict(yaml.safe_load(yaml.safe_dump(cfg.to_dict())))
    assert again == cfg
    assert again.to_dict() == cfg.to_dict()


def test_explicit_matrices_config(tmp_path):
    d = {"energy": {"A": [[1.0]], "B": [[-1.0]], "G": [[2.0]], "f": [[0.0, 0.0], [1.0, 2.0]]},
         "potentials": {"V_u": {"p": 2}, "V_z": {"p": 2}, "R": {"kappa": 0.5}},
         "initial": {"u": [0.0], "z": [0.0]}, "alpha": 1.0, "eps": [0.1], "tau": 0.01, "T": 1.0,
         "n_nodes": 50, "output": str(tmp_path / "m")}
    p = tmp_path / "m.yaml"
    p.write_text(yaml.safe_dump(d))
    out = run_experiment(p, workers=1)
    # the same system as the bundled elastoplastic example
    ref = run_experiment(write_cfg(tmp_path, eps=[0.1], tau=0.01, tau_ratio=None, n_nodes=50,
                                   output=str(tmp_path / "r")), workers=1)
    a = read(out / "eps_00" / "trajectory.csv")[1]
    b = read(ref / "eps_00" / "trajectory.csv")[1]
    np.testing.assert_allclose(np.array(a, float), np.array(b, float), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("patch,path", [
    ({"eps": []}, "eps"),
    ({"eps": [0.1, 0.2]}, "eps"),
    ({"energy": {"builtin": "Nope"}}, "energy.builtin"),
    ({"tolerances": {"tol_q": 1.0}}, "tolerances.tol_q"),
    ({"colour": "red"}, "colour"),
    ({"tau": 0.1}, "tau"),
    ({"alpha": -1.0}, "alpha"),
])
def test_config_errors_name_key_path(tmp_path, patch, path):
    p = write_cfg(tmp_path, **patch)
    with pytest.raises(ConfigError, match=f"^{path}"):
        load_config(p)
    assert main(["solve", str(p)]) == EXIT_CONFIG


def test_missing_config_file_exit_code(tmp_path):
    assert main(["solve", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_dimension_mismatch_is_config_error(tmp_path):
    p = write_cfg(tmp_path, initial={"u": [0.0, 1.0], "z": [0.0]})
    with pytest.raises(ConfigError, match="^initial"):
        run_experiment(p)


def test_step_snapped_to_horizon():
    cfg = ExperimentConfig.from_dict({"energy": {"builtin": "Prototype2dof"}, "alpha": 1.0, "eps": [0.3],
                                      "tau": 0.03, "T": 1.0, "output": "x"})
    n = 1.0 / cfg.step(0.3)
    assert abs(n - round(n)) < 1e-9 and cfg.step(0.3) <= 0.03


# ---------------------------------------------------------------- runs

def test_solve_outputs_and_determinism(tmp_path, monkeypatch):
    p = write_cfg(tmp_path)
    assert main(["solve", str(p), "--output", str(tmp_path / "a")]) == EXIT_OK
    monkeypatch.setenv("BVLAB_WORKERS", "2")
    assert main(["solve", str(p), "--output", str(tmp_path / "b")]) == EXIT_OK
    a, b = tmp_path / "a", tmp_path / "b"
    names = ["summary.csv", "bv_check.csv", "jumps.csv"] + [f"eps_0{k}/{f}" for k in range(2)
                                                          for f in ("trajectory.csv", "paramcurve.csv", "regimes.csv")]
    for n in names:
        assert filecmp.cmp(a / n, b / n, shallow=False), n
    header, rows = read(a / "summary.csv")
    assert header[:7] == ["eps", "tau", "S_eps", "u_L1", "z_L1", "R_var", "ed_residual"]
    assert len(rows) == 2
    header, _ = read(a / "eps_00" / "regimes.csv")
    assert header == ["s", "label", "lambda_u", "lambda_z", "residual"]


def test_analyze_reproduces_solve(tmp_path):
    p = write_cfg(tmp_path)
    out = run_experiment(p, workers=1)
    before = (out / "eps_01" / "paramcurve.csv").read_bytes()
    (out / "eps_01" / "paramcurve.csv").unlink()
    assert main(["analyze", str(out)]) == EXIT_OK
    assert (out / "eps_01" / "paramcurve.csv").read_bytes() == before


def test_solver_failure_keeps_partial_artifacts(tmp_path, monkeypatch):
    import bvlab.experiment as ex
    from bvlab.viscous import SolverError

    real = ex.solve_viscous

    def flaky(cfg, *a, **k):
        if cfg.eps < 0.15:
            raise SolverError("inner iteration stalled")
        return real(cfg, *a, **k)

    monkeypatch.setattr(ex, "solve_viscous", flaky)
    p = write_cfg(tmp_path)
    assert main(["solve", str(p)]) == 2
    assert (tmp_path / "out" / "eps_00" / "trajectory.csv").exists()


def test_plotdata_missing_inputs(tmp_path, capsys):
    assert main(["plotdata", str(tmp_path)]) == EXIT_CONFIG
    assert "config.yaml" in capsys.readouterr().err
    p = write_cfg(tmp_path)
    out = run_experiment(p, workers=1)
    (out / "eps_01" / "regimes.csv").unlink()
    missing = emit_plotdata(out)
    assert missing == [str(out / "eps_01" / "regimes.csv")]


@pytest.mark.parametrize("name", ["elastoplastic", "prototype", "ode45"])
def test_plotdata_golden(tmp_path, name):
    out = run_experiment(GOLDEN / f"{name}.yaml", output=tmp_path / name, workers=1)
    assert main(["plotdata", str(out)]) == EXIT_OK
    for f in ("t_u.csv", "t_z.csv", "s_t.csv", "regimes.csv"):
        h1, r1 = read(out / "plotdata" / f)
        h2, r2 = read(GOLDEN / name / f)
        assert h1 == h2 == ["series", "x", "y"]
        assert [r[0] for r in r1] == [r[0] for r in r2]
        x1 = np.array([r[1:] for r in r1], float)
        x2 = np.array([r[1:] for r in r2], float)
        np.testing.assert_allclose(x1, x2, rtol=1e-9, atol=1e-12)


def test_ode_summary_matches_exact_speed(tmp_path):
    p = write_cfg(tmp_path, energy={"builtin": "Ode45Example", "params": {"lam": 1.0, "omega": 1.0, "a": 1.0}},
                  eps=[0.5, 0.2, 0.1], tau=1e-3, tau_ratio=None, T=2 * math.pi, n_nodes=200)
    out = run_experiment(p, workers=1)
    _, rows = read(out / "summary.csv")
    for r in rows:
        eps, u_L1 = float(r[0]), float(r[3])
        exact = abs(1.0 / (1.0 + 1j * eps)) * 2 * math.pi
        assert abs(u_L1 - exact) <= 0.01 * exact


def test_prototype_sweep_residuals_decrease(tmp_path):
    p = write_cfg(tmp_path, energy={"builtin": "Prototype2dof"}, eps=[1e-1, 1e-2, 1e-3], tau_ratio=0.1,
                  n_nodes=500)
    out = run_experiment(p)
    _, rows = read(out / "summary.csv")
    assert len(rows) == 3
    assert len(list(out.glob("eps_*/trajectory.csv"))) == 3
    res = [abs(float(r[6])) for r in rows]
    assert res[0] > res[1] > res[2]


def test_selftest_command():
    assert main(["selftest"]) == EXIT_OK


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bvlab.cli", "solve", str(tmp_path / "none.yaml")],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_CONFIG
    assert "config error" in r.stderr

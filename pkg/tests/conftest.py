import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=30, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance results collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class _Run:
    def __init__(self, inst, traj, curve):
        self.inst, self.traj, self.curve = inst, traj, curve


def _double_well(eps, n_nodes=4000):
    from bvlab import builtins as bi
    from bvlab.rescale import arclength, reparametrize
    from bvlab.viscous import SolverConfig, solve_viscous

    inst = bi.double_well_jump()
    cfg = SolverConfig(eps, 1.0, eps / 20, inst.T)
    traj = solve_viscous(cfg, inst.energy, inst.pots, inst.u0, inst.z0)
    curve = reparametrize(traj, arclength(traj), n_nodes, inst.energy, inst.pots)
    return _Run(inst, traj, curve)


@pytest.fixture(scope="session")
def double_well_runs():
    """Viscous double-well runs at alpha = 1, tau = eps/20, keyed by eps."""
    return {eps: _double_well(eps) for eps in (1e-2, 1e-3)}


def scaling_keeps_support(lam, *arrays):
    """True when multiplying by lam leaves every nonzero entry nonzero, so the
    scaled input really is lam times the original (no subnormal underflow)."""
    return all(np.array_equal(lam * a != 0, a != 0) for a in arrays)

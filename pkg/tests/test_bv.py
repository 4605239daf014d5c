import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bvlab import builtins as bi
from bvlab.bv import (
    ALLOWED_LABELS,
    BVCandidate,
    ClassifyTolerances,
    bv_candidate,
    check_bv,
    classify_curve,
    classify_regime,
    compute_jump_costs,
    detect_jumps,
    finsler_cost,
    m_eps,
    total_variation,
)
from bvlab.contact import JointBQuery, joint_b
from bvlab.energy import Load, QuadraticEnergy, slopes
from bvlab.potentials import Potentials, RatePotential, ViscousPotential, eval_rate
from bvlab.rescale import arclength, reparametrize
from bvlab.viscous import SolverConfig, solve_viscous
from conftest import scaling_keeps_support

DW_TOL = ClassifyTolerances(tol_t=0.05)
small = st.floats(-3, 3, allow_nan=False)


def quad_pots(n=2, m=1, kappa=1.0):
    return Potentials(ViscousPotential.quadratic(n), RatePotential.symmetric(kappa, m), ViscousPotential.quadratic(m))


def linear_energy(b_u, b_z):
    """E = <b_u, u> + <b_z, z> + small quadratic, so gradients are easy to place."""
    n, m = len(b_u), len(b_z)
    return QuadraticEnergy(np.zeros((n, n)), np.zeros((m, n)), np.zeros((m, m)),
                           Load.from_samples([0, 1], [-np.asarray(b_u)] * 2), Load.from_samples([0, 1], [-np.asarray(b_z)] * 2),
                           1.0, offset=10.0)


# ---------------------------------------------------------------- M-function

def test_m_vanishes_at_equilibrium_with_unit_time_speed():
    inst = bi.prototype_2dof()
    assert m_eps(1.0, 1.0, 0.0, inst.u0, inst.z0, 1.0, [0.0, 0.0], [0.0], inst.energy, inst.pots) == 0.0


def test_m_limit_infinite_off_equilibrium():
    E = linear_energy([1.0, 0.0], [0.0])
    assert m_eps(1.0, 0.0, 0.5, [0.0, 0.0], [0.0], 1.0, [0.0, 0.0], [0.0], E, quad_pots()) == math.inf


def test_m_limit_quadratic_spot_value():
    E = linear_energy([1.0, 1.0], [2.0])  # s_u = 1, s_z = 1/2 (2 - 1)^2 = 0.5
    pots = quad_pots()
    du, dz = np.array([0.6, -0.8]), np.array([1.5])
    val = m_eps(1.0, 0.0, 0.5, [0.0, 0.0], [0.0], 0.0, du, dz, E, pots)
    expected = 1.5 + 2.0 * math.sqrt(0.5 * (1.0 + 1.5 ** 2)) * math.sqrt(1.5)
    assert math.isclose(val, expected, rel_tol=1e-13)
    assert math.isclose(val, joint_b(JointBQuery(0.0, du, dz, 1.0, 0.5, 1.0, 0.0), pots), rel_tol=1e-15)


@given(arrays(np.float64, 2, elements=small), arrays(np.float64, 1, elements=small),
       arrays(np.float64, 2, elements=small), arrays(np.float64, 1, elements=small),
       st.sampled_from([0.5, 1.0, 2.0]))
def test_m_limit_convex_and_homogeneous(u1, z1, u2, z2, alpha):
    E = linear_energy([0.5, -0.3], [1.7])
    pots = quad_pots()
    M = lambda dt, du, dz: m_eps(alpha, 0.0, 0.3, [0.0, 0.0], [0.0], dt, du, dz, E, pots)
    for lam in (0.5, 2.0, 7.0):
        assume(scaling_keeps_support(lam, u1, z1))
        a, b = M(0.0, lam * u1, lam * z1), M(0.0, u1, z1)
        assert (math.isinf(a) and math.isinf(b)) or math.isclose(a, lam * b, rel_tol=1e-12, abs_tol=1e-12)
    mid = M(0.0, 0.5 * (u1 + u2), 0.5 * (z1 + z2))
    ends = 0.5 * (M(0.0, u1, z1) + M(0.0, u2, z2))
    assert mid <= ends * (1 + 1e-12) + 1e-12


@given(st.floats(0.0, 2.0), arrays(np.float64, 2, elements=small), arrays(np.float64, 1, elements=small),
       arrays(np.float64, 2, elements=small), arrays(np.float64, 1, elements=small),
       st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.0, 1e-3, 0.1, 1.0]))
def test_m_contact_inequality(dt, du, dz, bu, bz, alpha, eps):
    E = linear_energy(bu, bz)
    pots = quad_pots()
    sl = slopes(E, pots, 0.3, np.zeros(2), np.zeros(1))
    M = m_eps(alpha, eps, 0.3, np.zeros(2), np.zeros(1), dt, du, dz, E, pots)
    pairing = -sl.mu @ du - sl.zeta @ dz
    assert M >= pairing - 1e-9 * (1 + abs(pairing))


@given(st.floats(1e-3, 2.0), arrays(np.float64, 2, elements=small), arrays(np.float64, 1, elements=small),
       st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.sampled_from([0.5, 1.0, 2.0]), st.floats(1e-3, 1.0),
       st.floats(0.05, 1.0))
def test_coercivity_surrogate(tau, du, dz, su, sz, alpha, eps, c):
    pots = quad_pots()
    M = joint_b(JointBQuery(tau, du, dz, su, sz, alpha, eps), pots)
    kappa = math.sqrt(2.0 * c)
    if alpha < 1 and sz >= c:
        assert np.linalg.norm(dz) <= M / kappa * (1 + 1e-12) + 1e-12
    if alpha >= 1 and su + sz >= c:
        assert np.linalg.norm(dz) <= M / kappa * (1 + 1e-12) + 1e-12


# ---------------------------------------------------------------- regimes

def test_sliding_node_is_equilibrated_rate_independent():
    lab = classify_regime(1.0, 1e-3, 0.8, [0.1, 0.0], [0.2], [0.0, 0.0], [-0.5], 0.0, 0.0, quad_pots())
    assert lab.label == "EuRz"


def test_alpha_above_one_blocked_z():
    pots = quad_pots()
    # u moves viscously with a large multiplier, z frozen but driven outside the box
    lab = classify_regime(2.0, 1e-2, 0.0, [0.5, 0.0], [0.0], [-0.5, 0.0], [-2.0], 0.125, 0.5, pots)
    assert lab.label == "Bz"
    assert lab.label in ALLOWED_LABELS["gt1"]


def test_alpha_one_joint_viscous():
    pots = quad_pots()
    lam = 1.0
    du, dz = np.array([0.3, 0.4]), np.array([0.2])
    mu = -lam * du
    zeta = -(1.0 + lam * dz)  # sigma = 1 at the box edge
    lab = classify_regime(1.0, 1e-4, 0.0, du, dz, mu, zeta, 0.5 * mu @ mu, 0.5 * 0.2 ** 2, pots)
    assert lab.label == "Vuz"
    assert math.isclose(lab.lambda_u, lab.lambda_z, rel_tol=1e-12)


def test_conflicting_node_unclassified():
    # time runs but u is far from equilibrium
    lab = classify_regime(1.0, 1e-3, 0.9, [0.1, 0.0], [0.0], [3.0, 0.0], [0.0], 4.5, 0.0, quad_pots())
    assert lab.label == "Unclassified"


def test_double_well_labels_respect_tables(double_well_runs):
    run = double_well_runs[1e-3]
    labels = classify_curve(run.curve, run.inst.pots, DW_TOL)
    assert len(labels) == run.curve.n_nodes
    used = {lb.label for lb in labels}
    assert used <= set(ALLOWED_LABELS["eq1"]) | {"Unclassified"}
    # on the jump plateau the viscous regime shows up
    assert "Vuz" in used and "EuRz" in used


# ---------------------------------------------------------------- jumps

def test_smooth_run_has_no_jumps():
    inst = bi.prototype_2dof()
    traj = solve_viscous(SolverConfig(0.01, 1.0, 5e-4, 1.0), inst.energy, inst.pots, inst.u0, inst.z0)
    curve = reparametrize(traj, arclength(traj), 1000, inst.energy, inst.pots)
    assert detect_jumps(curve, 0.05) == []


def test_double_well_single_plateau(double_well_runs):
    counts = []
    for eps, run in double_well_runs.items():
        plats = detect_jumps(run.curve, DW_TOL.tol_t)
        counts.append(len(plats))
        p = plats[0]
        assert p.u_minus[0] < 0 < p.u_plus[0]
        # the wells of u^3 - u at the jump load sit near -1/2 (fold) and +1
        assert abs(p.u_plus[0] - 1.0) < 0.2
    assert counts == [1, 1]


def test_finsler_cost_zero_for_equal_endpoints():
    inst = bi.double_well_jump()
    q = np.array([0.3]), np.array([0.1])
    val, curve = finsler_cost(1.0, 0.5, *q, *q, inst.energy, inst.pots, n_nodes=16)
    assert val == 0.0
    assert np.allclose(curve.u, 0.3) and np.allclose(curve.z, 0.1)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_finsler_cost_rate_independent_segment(alpha):
    inst = bi.elastoplastic_1d(kappa=0.5)
    # at t = 0 the states u = z with |z| <= 1/2 are equilibrated and stable
    val, _ = finsler_cost(alpha, 0.0, np.array([0.0]), np.array([0.0]), np.array([0.3]), np.array([0.3]),
                          inst.energy, inst.pots, n_nodes=16)
    assert math.isclose(val, 0.5 * 0.3, rel_tol=1e-6)


def test_finsler_cost_dominates_rate_increment():
    inst = bi.double_well_jump()
    rng = np.random.default_rng(5)
    for _ in range(4):
        a, b = rng.normal(size=2), rng.normal(size=2)
        val, tc = finsler_cost(1.0, 0.5, a[:1], a[1:], b[:1], b[1:], inst.energy, inst.pots, n_nodes=24)
        assert val >= eval_rate(inst.pots.R, b[1:] - a[1:]) - 1e-9
        assert np.isfinite(tc.value)


def test_jump_cost_matches_energy_drop(double_well_runs):
    run = double_well_runs[1e-3]
    E, pots = run.inst.energy, run.inst.pots
    cand = bv_candidate(run.curve, detect_jumps(run.curve, DW_TOL.tol_t))
    compute_jump_costs(1.0, cand, E, pots, n_nodes=64)
    (j,) = cand.jumps
    assert math.isclose(j.cost, j.energy_drop, rel_tol=0.02)
    rep = check_bv(1.0, cand, E, pots)
    assert rep.stationarity_max < 1e-2 and rep.stability_max < 1e-2


def test_total_variation_without_jumps_is_rate_variation():
    pots = quad_pots(1, 1, kappa=0.7)
    t = np.linspace(0, 1, 11)
    z = np.sin(3 * t)[:, None]
    cand = BVCandidate(t, np.zeros((11, 1)), z, [])
    expected = 0.7 * np.abs(np.diff(z[:, 0])).sum()
    assert math.isclose(total_variation(1.0, cand, pots), expected, rel_tol=1e-14)
    sub = total_variation(1.0, cand, pots, interval=(0.0, 0.5))
    assert math.isclose(sub, 0.7 * np.abs(np.diff(z[:6, 0])).sum(), rel_tol=1e-14)

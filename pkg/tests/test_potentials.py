import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize

from bvlab.potentials import (
    ConfigurationError,
    RatePotential,
    ViscousPotential,
    conj_viscous,
    conj_w_z,
    eval_rate,
    eval_viscous,
    numeric_conjugate,
    prox_quadratic_rate,
    prox_z_step,
)

finite = st.floats(-50, 50, allow_nan=False)
positive = st.floats(0.05, 10)


def vec(n):
    return arrays(np.float64, n, elements=finite)


def grid_sup(fun, xi, lim=12.0, n=1201):
    """sup_v <xi, v> - fun(v) on a 2-d grid, refined once around the best point."""
    g = np.linspace(-lim, lim, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    V = np.stack([X, Y], axis=-1)
    vals = V @ xi - fun(V)
    k = np.unravel_index(np.argmax(vals), vals.shape)
    c = V[k]
    h = g[1] - g[0]
    g2 = np.linspace(-h, h, 401)
    X, Y = np.meshgrid(c[0] + g2, c[1] + g2, indexing="ij")
    V = np.stack([X, Y], axis=-1)
    return float((V @ xi - fun(V)).max())


# ---------------------------------------------------------------- rate potential

def test_rate_l1_norm():
    assert eval_rate(RatePotential.symmetric(1.0, 2), [3.0, -2.0]) == 5.0


def test_rate_zero():
    P = RatePotential([2.0, 0.5, 1.0], [1.0, 3.0, 0.2])
    assert eval_rate(P, np.zeros(3)) == 0.0


def test_rate_asymmetric_branches_match_support_function():
    P = RatePotential([2.0], [1.0])
    sig = np.linspace(-1.0, 2.0, 30001)
    for v, expected in ((-4.0, 4.0), (4.0, 8.0)):
        assert eval_rate(P, [v]) == expected
        assert math.isclose((sig * v).max(), expected, rel_tol=1e-12)


def test_rate_rejects_negative_thresholds():
    with pytest.raises(ConfigurationError):
        RatePotential([-1.0], [1.0])


@given(vec(3), st.floats(1e-3, 1e3), arrays(np.float64, 3, elements=positive),
       arrays(np.float64, 3, elements=positive))
def test_rate_positively_homogeneous(v, lam, kp, km):
    P = RatePotential(kp, km)
    assert math.isclose(eval_rate(P, lam * v), lam * eval_rate(P, v), rel_tol=1e-13, abs_tol=1e-300)


@given(vec(2), vec(2))
def test_rate_subadditive(a, b):
    P = RatePotential([1.5, 0.3], [0.7, 2.0])
    assert eval_rate(P, a + b) <= eval_rate(P, a) + eval_rate(P, b) + 1e-10


def test_subdifferential_residual_box():
    P = RatePotential([1.0, 2.0], [1.0, 0.5])
    assert P.subdifferential_residual([0.0, 0.0], [0.3, -0.5]) == 0.0
    assert P.subdifferential_residual([1.0, -1.0], [1.0, -0.5]) == 0.0
    assert math.isclose(P.subdifferential_residual([1.0, 0.0], [0.5, 0.0]), 0.5)


# ---------------------------------------------------------------- viscous potentials

def test_quadratic_value():
    assert eval_viscous(ViscousPotential.quadratic(2), [3.0, 4.0]) == 12.5


def test_custom_quartic_value():
    assert eval_viscous(ViscousPotential.custom_d(), [1.0, 1.0]) == 0.75


def test_custom_piecewise_value():
    assert math.isclose(eval_viscous(ViscousPotential.custom_c(), [0.0, 2.0]), 1.75)


def test_non_spd_weight_rejected():
    with pytest.raises(ConfigurationError):
        ViscousPotential.quadratic(2, np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ConfigurationError):
        ViscousPotential.p_homogeneous(1.0, 2)


def test_quadratic_self_dual():
    assert conj_viscous(ViscousPotential.quadratic(2), [3.0, 4.0]) == 12.5


def test_custom_piecewise_conjugate():
    V = ViscousPotential.custom_c()
    assert math.isclose(conj_viscous(V, [0.0, 2.0]), 2.5)
    assert math.isclose(grid_sup(lambda w: eval_viscous(V, w), np.array([0.0, 2.0])), 2.5, abs_tol=1e-6)


def test_weighted_conjugate_against_grid():
    V = ViscousPotential.quadratic(2, np.diag([2.0, 1.0]))
    xi = np.array([2.0, 1.0])
    assert math.isclose(conj_viscous(V, xi), 1.5, rel_tol=1e-14)
    assert math.isclose(grid_sup(lambda w: eval_viscous(V, w), xi, lim=4.0), 1.5, abs_tol=1e-8)


def test_custom_quartic_printed_and_exact_conjugates():
    xi = np.array([0.5, 2.0])
    exact = 0.5 * 0.25 + 0.75 * 2.0 ** (4 / 3)
    printed = 0.5 * 0.25 + (4 / 3) * 2.0 ** (4 / 3)
    assert math.isclose(conj_viscous(ViscousPotential.custom_d(), xi), printed)
    assert math.isclose(conj_viscous(ViscousPotential.custom_d(printed_conjugate=False), xi), exact)
    Vd = ViscousPotential.custom_d()
    assert math.isclose(grid_sup(lambda w: eval_viscous(Vd, w), xi, lim=4.0), exact, abs_tol=1e-7)


def _shipped():
    W = np.array([[2.0, 0.3], [0.3, 1.0]])
    zeta = lambda h: 0.5 * np.asarray(h) ** 2 + np.asarray(h) ** 4 / 4
    return [
        ViscousPotential.quadratic(2, W),
        ViscousPotential.p_homogeneous(3.0, 2, W),
        ViscousPotential.p_homogeneous(1.5, 2),
        ViscousPotential.norm_based(zeta, 2),
        ViscousPotential.custom_c(),
        ViscousPotential.custom_d(printed_conjugate=False),
    ]


@pytest.mark.parametrize("V", _shipped(), ids=lambda V: V.kind + str(V.p))
def test_biconjugate_round_trip(V):
    for v in ([0.3, -0.7], [1.2, 0.4], [-2.0, 1.5]):
        v = np.array(v)
        # psi**(v) = sup_xi <xi, v> - psi*(xi), attained at xi = grad psi(v)
        res = optimize.minimize(lambda xi: float(conj_viscous(V, xi)) - xi @ v, V.grad(v) + 0.1,
                                method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
        assert math.isclose(-res.fun, float(eval_viscous(V, v)), rel_tol=1e-6, abs_tol=1e-9)


@pytest.mark.parametrize("V", _shipped(), ids=lambda V: V.kind + str(V.p))
@given(v=vec(2), xi=vec(2))
def test_fenchel_young(V, v, xi):
    v, xi = v / 10, xi / 10
    gap = float(eval_viscous(V, v)) + float(conj_viscous(V, xi)) - xi @ v
    assert gap >= -1e-9 * (1 + abs(xi @ v))


@pytest.mark.parametrize("V", _shipped()[:3] + _shipped()[4:], ids=lambda V: V.kind + str(V.p))
@given(v=vec(2))
def test_fenchel_young_equality_at_gradient(V, v):
    v = v / 10
    g = V.grad(v)
    gap = float(eval_viscous(V, v)) + float(conj_viscous(V, g)) - g @ v
    assert abs(gap) <= 1e-9 * (1 + abs(g @ v))


def test_numeric_conjugate_matches_closed_form():
    V = ViscousPotential.p_homogeneous(3.0, 2, np.diag([1.0, 2.0]))
    xi = np.array([0.7, -1.1])
    assert math.isclose(numeric_conjugate(lambda w: eval_viscous(V, w), xi)[0], conj_viscous(V, xi), rel_tol=1e-7)


# ---------------------------------------------------------------- W*_z

def test_conj_w_z_inside_box():
    V = ViscousPotential.quadratic(2)
    assert conj_w_z(V, RatePotential.symmetric(1.0, 2), [0.5, -0.3]) == 0.0


def test_conj_w_z_outside_box():
    V = ViscousPotential.quadratic(2)
    assert math.isclose(conj_w_z(V, RatePotential.symmetric(1.0, 2), [2.0, 0.5]), 0.5)
    s = np.linspace(-1, 1, 2001)
    S1, S2 = np.meshgrid(s, s)
    assert math.isclose((0.5 * ((2 - S1) ** 2 + (0.5 - S2) ** 2)).min(), 0.5, abs_tol=1e-12)


def test_conj_w_z_asymmetric():
    V = ViscousPotential.quadratic(1)
    assert math.isclose(conj_w_z(V, RatePotential([2.0], [1.0]), [-3.0]), 2.0)
    s = np.linspace(-1, 2, 30001)
    assert math.isclose((0.5 * (-3 - s) ** 2).min(), 2.0, abs_tol=1e-12)


def test_conj_w_z_general_weight_against_grid():
    W = np.array([[2.0, 0.8], [0.8, 1.0]])
    V = ViscousPotential.quadratic(2, W)
    P = RatePotential([1.0, 0.5], [0.3, 1.0])
    zeta = np.array([2.0, -1.7])
    s1 = np.linspace(-0.3, 1.0, 1301)
    s2 = np.linspace(-1.0, 0.5, 1501)
    S = np.stack(np.meshgrid(s1, s2, indexing="ij"), axis=-1)
    vals = conj_viscous(V, zeta - S)
    assert math.isclose(conj_w_z(V, P, zeta), vals.min(), rel_tol=1e-5)


@given(arrays(np.float64, 2, elements=st.floats(-3, 3)))
def test_conj_w_z_zero_iff_stable(zeta):
    P = RatePotential([1.0, 0.5], [0.7, 1.2])
    V = ViscousPotential.quadratic(2, np.array([[1.5, 0.4], [0.4, 1.0]]))
    val = conj_w_z(V, P, zeta)
    assert val >= 0.0
    if P.stable_set.contains(zeta):
        assert val == 0.0
    elif P.stable_set.distance(zeta) > 1e-6:
        assert val > 0.0


# ---------------------------------------------------------------- prox step

def test_prox_stable_drive_does_not_move():
    P = RatePotential.symmetric(1.0, 2)
    z = prox_z_step(P, ViscousPotential.quadratic(2), [0.3, -0.2], [0.9, -1.0], 0.1, 0.5)
    np.testing.assert_array_equal(z, [0.3, -0.2])


def _grid_prox(kappa, eps, tau, z_prev, drive):
    g = np.linspace(z_prev - 10, z_prev + 10, 2_000_001)
    f = kappa * np.abs(g - z_prev) + eps / (2 * tau) * (g - z_prev) ** 2 + drive * g
    return g[np.argmin(f)]


def test_prox_scalar_value():
    P = RatePotential.symmetric(1.0, 1)
    z = prox_z_step(P, ViscousPotential.quadratic(1), [0.0], [-3.0], 1.0, 1.0)
    assert math.isclose(z[0], 2.0, rel_tol=1e-14)
    assert abs(_grid_prox(1.0, 1.0, 1.0, 0.0, -3.0) - 2.0) <= 1e-5


def test_prox_doubling_step_doubles_displacement():
    P = RatePotential.symmetric(1.0, 1)
    z2 = prox_z_step(P, ViscousPotential.quadratic(1), [0.0], [-3.0], 2.0, 1.0)
    assert math.isclose(z2[0], 4.0, rel_tol=1e-14)
    assert abs(_grid_prox(1.0, 1.0, 2.0, 0.0, -3.0) - 4.0) <= 1e-5


@given(arrays(np.float64, 3, elements=st.floats(-5, 5)), arrays(np.float64, 3, elements=st.floats(-5, 5)),
       st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_prox_satisfies_inclusion(z_prev, drive, tau, eps):
    P = RatePotential([1.0, 0.4, 2.0], [0.5, 1.5, 1.0])
    W = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 1.5]])
    z = prox_z_step(P, ViscousPotential.quadratic(3, W), z_prev, drive, tau, eps)
    v = (z - z_prev) / tau
    sigma = -drive - eps * W @ v
    assert P.subdifferential_residual(v, sigma, vtol=1e-12) <= 1e-10 * (1 + np.abs(drive).max())


@pytest.mark.parametrize("V", [ViscousPotential.custom_c(), ViscousPotential.custom_d(),
                               ViscousPotential.p_homogeneous(3.0, 2)], ids=lambda V: V.kind + str(V.p))
def test_prox_nonquadratic_is_minimiser(V):
    P = RatePotential.symmetric(0.5, 2)
    z_prev, drive, tau, eps = np.array([0.1, -0.2]), np.array([-2.0, 1.5]), 0.3, 0.4
    z = prox_z_step(P, V, z_prev, drive, tau, eps)
    obj = lambda w: eval_rate(P, w - z_prev) + tau / eps * eval_viscous(V, eps * (w - z_prev) / tau) + drive @ w
    rng = np.random.default_rng(0)
    best = obj(z)
    for _ in range(2000):
        assert obj(z + rng.normal(scale=0.05, size=2)) >= best - 1e-9


def test_prox_quadratic_rate_coupled():
    H = np.array([[2.0, 0.9], [0.9, 1.0]])
    b = np.array([3.0, -2.5])
    c = np.array([0.2, 0.1])
    P = RatePotential([0.5, 0.3], [0.4, 0.8])
    x, _ = prox_quadratic_rate(H, b, c, P)
    sigma = b - H @ x
    assert P.subdifferential_residual(x - c, sigma, vtol=1e-13) <= 1e-10


@pytest.mark.parametrize("build", [
    lambda: RatePotential([math.inf], [1.0]),
    lambda: RatePotential([1.0], [math.nan]),
    lambda: ViscousPotential.quadratic(2, np.diag([1.0, math.inf])),
])
def test_non_finite_parameters_are_rejected(build):
    with pytest.raises(ConfigurationError):
        build()

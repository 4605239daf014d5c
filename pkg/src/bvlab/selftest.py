"""Fast randomized property checks run by ``bvlab selftest``.

Each check draws seeded random inputs and returns ``(passed, detail)``.
"""
from __future__ import annotations

import math

import numpy as np

from .contact import JointBQuery, contact_potential, joint_b, lower_bound_check
from .potentials import (
    Potentials,
    RatePotential,
    ViscousPotential,
    conj_viscous,
    conj_w_z,
    eval_rate,
    eval_viscous,
    prox_z_step,
)

__all__ = ["CHECKS", "run_selftest"]


def _spd(rng, n):
    M = rng.normal(size=(n, n))
    return M @ M.T + 0.5 * np.eye(n)


def check_rate_homogeneity(rng, n=200):
    worst = 0.0
    for _ in range(n):
        P = RatePotential(rng.uniform(0.1, 3, 3), rng.uniform(0.1, 3, 3))
        v, lam = rng.normal(size=3), rng.uniform(0.01, 100)
        worst = max(worst, abs(eval_rate(P, lam * v) - lam * eval_rate(P, v)) / (1 + lam * eval_rate(P, v)))
    return worst < 1e-14, f"max rel. error {worst:.2e}"


def check_fenchel_young(rng, n=200):
    worst_gap, worst_eq = math.inf, 0.0
    for _ in range(n):
        V = ViscousPotential.p_homogeneous(rng.uniform(1.3, 4), 2, _spd(rng, 2))
        v, xi = rng.normal(size=2), rng.normal(size=2)
        worst_gap = min(worst_gap, eval_viscous(V, v) + conj_viscous(V, xi) - xi @ v)
        g = V.grad(v)
        worst_eq = max(worst_eq, abs(eval_viscous(V, v) + conj_viscous(V, g) - g @ v))
    return worst_gap > -1e-12 and worst_eq < 1e-9, f"min gap {worst_gap:.2e}, equality error {worst_eq:.2e}"


def check_stability_characterization(rng, n=200):
    bad = 0
    for _ in range(n):
        P = RatePotential(rng.uniform(0.2, 2, 2), rng.uniform(0.2, 2, 2))
        V = ViscousPotential.quadratic(2, np.diag(rng.uniform(0.5, 2, 2)))
        zeta = rng.uniform(-2.5, 2.5, 2)
        inside = bool(P.stable_set.contains(zeta))
        if (conj_w_z(V, P, zeta) <= 1e-14) != inside:
            bad += 1
    return bad == 0, f"{bad} mismatches"


def check_prox_stationarity(rng, n=100):
    worst = 0.0
    for _ in range(n):
        P = RatePotential(rng.uniform(0.2, 2, 3), rng.uniform(0.2, 2, 3))
        W = _spd(rng, 3)
        V = ViscousPotential.quadratic(3, W)
        z_prev, drive = rng.normal(size=3), 3 * rng.normal(size=3)
        tau, eps = rng.uniform(1e-3, 1), rng.uniform(1e-3, 1)
        z = prox_z_step(P, V, z_prev, drive, tau, eps)
        v = (z - z_prev) / tau
        sigma = -drive - eps * W @ v
        worst = max(worst, P.subdifferential_residual(v, sigma, vtol=1e-13))
    return worst <= 1e-10, f"max inclusion residual {worst:.2e}"


def check_contact_properties(rng, n=100):
    """sigma -> b concave nondecreasing; v -> b 1-homogeneous."""
    worst_conc, worst_mono, worst_hom = 0.0, 0.0, 0.0
    for _ in range(n):
        V = ViscousPotential.p_homogeneous(rng.uniform(1.3, 4), 2, _spd(rng, 2))
        v = rng.normal(size=2)
        s = np.linspace(0.1, 3, 12)
        b = np.array([contact_potential(V, v, x) for x in s])
        worst_mono = max(worst_mono, -np.diff(b).min())
        worst_conc = max(worst_conc, np.diff(b, 2).max())
        lam = rng.uniform(0.1, 10)
        worst_hom = max(worst_hom, abs(contact_potential(V, lam * v, 1.0) - lam * contact_potential(V, v, 1.0)))
    ok = worst_conc <= 1e-9 and worst_mono <= 1e-12 and worst_hom <= 1e-9
    return ok, f"concavity {worst_conc:.1e}, monotonicity {worst_mono:.1e}, homogeneity {worst_hom:.1e}"


def check_lower_bounds(rng, n=300):
    fails = 0
    for _ in range(n):
        pots = Potentials(ViscousPotential.quadratic(2, _spd(rng, 2)), RatePotential.symmetric(1.0, 1),
                          ViscousPotential.quadratic(1, np.array([[rng.uniform(0.5, 3)]])))
        alpha = float(rng.choice([0.5, 1.0, 2.0]))
        q = JointBQuery(rng.uniform(0, 1), rng.normal(size=2), rng.normal(size=1),
                        rng.uniform(0, 2), rng.uniform(0, 2), alpha, float(rng.uniform(1e-3, 1)))
        variants = ["split", "alpha<1" if alpha < 1 else "alpha>=1"] + (["alpha=1"] if alpha == 1 else [])
        fails += sum(not lower_bound_check(q, pots, v)[0] for v in variants)
    return fails == 0, f"{fails} violations"


def check_limit_homogeneity(rng, n=100):
    worst = 0.0
    pots = Potentials(ViscousPotential.quadratic(2), RatePotential.symmetric(1.0, 1), ViscousPotential.quadratic(1))
    for _ in range(n):
        u, z = rng.normal(size=2), rng.normal(size=1)
        su, sz = rng.uniform(0, 2, 2)
        lam = float(rng.choice([0.5, 2.0, 7.0]))
        a = joint_b(JointBQuery(0.0, lam * u, lam * z, su, sz, 1.0, 0.0), pots)
        b = joint_b(JointBQuery(0.0, u, z, su, sz, 1.0, 0.0), pots)
        worst = max(worst, abs(a - lam * b) / (1 + abs(a)))
    return worst < 1e-12, f"max rel. error {worst:.2e}"


CHECKS = {
    "rate potential 1-homogeneous": check_rate_homogeneity,
    "Fenchel-Young inequality and equality": check_fenchel_young,
    "zero conjugate iff locally stable": check_stability_characterization,
    "prox step stationarity": check_prox_stationarity,
    "contact potential concave / homogeneous": check_contact_properties,
    "joint B-function lower bounds": check_lower_bounds,
    "limit B-function 1-homogeneous": check_limit_homogeneity,
}


def run_selftest(seed=0, out=print):
    rng = np.random.default_rng(seed)
    ok = True
    for name, fn in CHECKS.items():
        passed, detail = fn(rng)
        ok &= passed
        out(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return ok

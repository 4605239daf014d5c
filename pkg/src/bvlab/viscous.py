"""Time-incremental minimisation for the viscous system

    0 in dV_u^{eps^alpha}(u') + D_u E(t, q),
    0 in dR(z') + dV_z^{eps}(z') + D_z E(t, q),

with V^lam(v) = V(lam v) / lam.  Each step minimises

    tau Psi((q - q_prev)/tau) + E(t_n, q)

over q = (u, z).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .potentials import (
    Potentials,
    conj_viscous,
    conj_w_z,
    eval_rate,
    eval_viscous,
    prox_quadratic_rate,
)

__all__ = [
    "SolverConfig",
    "SolverError",
    "StepSizeWarning",
    "Trajectory",
    "incremental_step",
    "solve_viscous",
    "ed_balance_residual",
    "apriori_stats",
    "LEDGER_NAMES",
]

LEDGER_NAMES = ("visc_u", "rate_z", "visc_z", "slope_u", "slope_z")


class SolverError(RuntimeError):
    pass


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    alpha: float
    tau: float
    T: float
    splitting: str = "joint"
    tol_newton: float = 1e-11
    max_iter: int = 100

    def __post_init__(self):
        if not (0 < self.eps <= 1):
            raise ValueError("eps must lie in (0, 1]")
        if self.alpha <= 0 or self.tau <= 0 or self.T <= 0:
            raise ValueError("alpha, tau, T must be positive")
        if self.splitting not in ("joint", "alternating"):
            raise ValueError("splitting must be 'joint' or 'alternating'")

    @property
    def eps_u(self):
        return self.eps ** self.alpha

    @property
    def n_steps(self):
        return int(round(self.T / self.tau))

    @property
    def step_ratio(self):
        """tau / min(eps^alpha, eps); should be small."""
        return self.tau / min(self.eps_u, self.eps)


@dataclass
class Trajectory:
    """Nodes t_0..t_N with states, the energy multipliers (mu, zeta), the
    rate multiplier sigma of the z-inclusion and the per-step dissipation
    ledger (row 0 is zero)."""

    t: np.ndarray
    u: np.ndarray
    z: np.ndarray
    mu: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    ledger: np.ndarray
    cfg: SolverConfig
    iterations: np.ndarray = field(default=None)

    @property
    def n_steps(self):
        return self.t.size - 1

    @property
    def dissipation_rate(self):
        return self.ledger.sum(axis=1)

    def columns(self):
        n, m = self.u.shape[1], self.z.shape[1]
        return (["t"] + [f"u_{i}" for i in range(n)] + [f"z_{i}" for i in range(m)]
                + [f"mu_{i}" for i in range(n)] + [f"zeta_{i}" for i in range(m)]
                + [f"ledger_{k}" for k in LEDGER_NAMES])

    def table(self):
        return np.column_stack([self.t, self.u, self.z, self.mu, self.zeta, self.ledger])


# --------------------------------------------------------------------------
# incremental functional


def _visc_terms(pots, cfg, du, dz):
    """tau * (V_u^{eps^a}(du/tau) + V_z^{eps}(dz/tau)), and its gradient/Hessian."""
    tau, eu, ez = cfg.tau, cfg.eps_u, cfg.eps
    val = 0.0
    if du.size:
        val += tau / eu * float(eval_viscous(pots.V_u, eu * du / tau))
    if dz.size:
        val += tau / ez * float(eval_viscous(pots.V_z, ez * dz / tau))
    return val


def _visc_grad(pots, cfg, du, dz):
    tau, eu, ez = cfg.tau, cfg.eps_u, cfg.eps
    gu = pots.V_u.grad(eu * du / tau).reshape(-1) if du.size else du
    gz = pots.V_z.grad(ez * dz / tau).reshape(-1) if dz.size else dz
    return gu, gz


def _visc_hess(pots, cfg, du, dz):
    tau, eu, ez = cfg.tau, cfg.eps_u, cfg.eps
    blocks = []
    for V, d, e in ((pots.V_u, du, eu), (pots.V_z, dz, ez)):
        k = d.size
        if k == 0:
            blocks.append(np.zeros((0, 0)))
        elif V.is_quadratic:
            blocks.append(e / tau * V.weight)
        else:
            x = e * d / tau
            H = np.empty((k, k))
            for j in range(k):
                h = 1e-6 * max(1.0, abs(x[j]))
                xp, xm = x.copy(), x.copy()
                xp[j] += h
                xm[j] -= h
                H[:, j] = (V.grad(xp).reshape(-1) - V.grad(xm).reshape(-1)) / (2 * h)
            # degenerate curvature at the origin (p > 2 or quartic parts)
            H = 0.5 * (H + H.T) + 1e-8 * np.eye(k)
            blocks.append(e / tau * H)
    n, m = du.size, dz.size
    H = np.zeros((n + m, n + m))
    H[:n, :n] = blocks[0]
    H[n:, n:] = blocks[1]
    return H


def _objective(E, pots, cfg, t, u_prev, z_prev, u, z):
    du, dz = u - u_prev, z - z_prev
    r = float(eval_rate(pots.R, dz)) if dz.size else 0.0
    return _visc_terms(pots, cfg, du, dz) + r + E.value(t, u, z)


def _prox_newton(E, pots, cfg, t, u_prev, z_prev, u, z, solve_u=True, solve_z=True):
    """One proximal Newton direction for the incremental functional, restricted
    to the blocks flagged by ``solve_u`` / ``solve_z``."""
    n, m = u.size, z.size
    du, dz = u - u_prev, z - z_prev
    gvu, gvz = _visc_grad(pots, cfg, du, dz)
    g = np.concatenate([gvu + E.grad_u(t, u, z), gvz + E.grad_z(t, u, z)])
    H = _visc_hess(pots, cfg, du, dz) + E.hessian(t, u, z)
    H = 0.5 * (H + H.T)
    idx = np.r_[np.arange(n) if solve_u else [], n + np.arange(m) if solve_z else []].astype(int)
    Hs = H[np.ix_(idx, idx)]
    if Hs.size:
        lo = np.linalg.eigvalsh(Hs).min()
        if lo <= 1e-12 * max(1.0, np.abs(Hs).max()):
            Hs = Hs + (abs(lo) + 1e-8 * max(1.0, np.abs(Hs).max())) * np.eye(idx.size)
    d = np.zeros(n + m)
    nu = int(solve_u) * n
    Huu, Huz = Hs[:nu, :nu], Hs[:nu, nu:]
    Hzz = Hs[nu:, nu:]
    gu = g[:n] if solve_u else np.zeros(0)
    gz = g[n:] if solve_z else np.zeros(0)
    if solve_z and m:
        if nu:
            X = np.linalg.solve(Huu, np.column_stack([gu, Huz]))
            Huu_inv_g, Huu_inv_Huz = X[:, 0], X[:, 1:]
            S = Hzz - Huz.T @ Huu_inv_Huz
            r = gz - Huz.T @ Huu_inv_g
        else:
            S, r = Hzz, gz
        S = 0.5 * (S + S.T)
        # min 1/2 x^T S x - (S z - r)^T x + R(x - z_prev)
        z_new, _ = prox_quadratic_rate(S, S @ z - r, z_prev, pots.R, x0=z)
        d[n:] = z_new - z
        if nu:
            d[:n] = -(Huu_inv_g + Huu_inv_Huz @ d[n:])
    elif nu:
        d[:n] = -np.linalg.solve(Huu, gu)
    # predicted decrease for the Armijo test
    rate_now = float(eval_rate(pots.R, z - z_prev)) if m else 0.0
    rate_new = float(eval_rate(pots.R, z + d[n:] - z_prev)) if m else 0.0
    pred = g @ d + rate_new - rate_now
    return d[:n], d[n:], pred


def incremental_step(cfg: SolverConfig, E, pots: Potentials, t_n, u_prev, z_prev, u0=None, z0=None):
    """Minimise tau Psi((q - q_prev)/tau) + E(t_n, q).

    Returns ``(u, z, iterations)``.  Raises :class:`SolverError` when the
    inner iteration does not reach ``cfg.tol_newton``.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    z_prev = np.asarray(z_prev, dtype=float)
    u = u_prev.copy() if u0 is None else np.array(u0, dtype=float)
    z = z_prev.copy() if z0 is None else np.array(z0, dtype=float)
    scale = 1.0 + max(np.abs(u_prev).max(initial=0.0), np.abs(z_prev).max(initial=0.0))
    phi = _objective(E, pots, cfg, t_n, u_prev, z_prev, u, z)
    blocks = [(True, True)] if cfg.splitting == "joint" else [(True, False), (False, True)]
    for it in range(1, cfg.max_iter + 1):
        step_max = 0.0
        for su, sz in blocks:
            du, dz, pred = _prox_newton(E, pots, cfg, t_n, u_prev, z_prev, u, z, su, sz)
            step = 1.0
            while True:
                un, zn = u + step * du, z + step * dz
                phin = _objective(E, pots, cfg, t_n, u_prev, z_prev, un, zn)
                if phin <= phi + 1e-4 * step * min(pred, 0.0) + 1e-14 * abs(phi) or step < 1e-10:
                    break
                step *= 0.5
            step_max = max(step_max, step * max(np.abs(du).max(initial=0.0), np.abs(dz).max(initial=0.0)))
            u, z, phi = un, zn, min(phin, phi)
        if step_max <= cfg.tol_newton * scale:
            return u, z, it
    raise SolverError(f"incremental step at t={t_n:.6g} did not converge: last update {step_max:.3e}")


def _multipliers(E, pots, cfg, t, u_prev, z_prev, u, z):
    tau = cfg.tau
    du, dz = u - u_prev, z - z_prev
    gvu, gvz = _visc_grad(pots, cfg, du, dz)
    mu = -gvu
    zeta = E.grad_z(t, u, z)
    sigma = -zeta - gvz
    return mu, zeta, sigma


def _ledger_row(pots, cfg, du, dz, mu, zeta):
    tau, eu, ez = cfg.tau, cfg.eps_u, cfg.eps
    d = np.zeros(5)
    if du.size:
        d[0] = float(eval_viscous(pots.V_u, eu * du / tau)) / eu
        d[3] = float(conj_viscous(pots.V_u, -mu)) / eu
    if dz.size:
        d[1] = float(eval_rate(pots.R, dz / tau))
        d[2] = float(eval_viscous(pots.V_z, ez * dz / tau)) / ez
        d[4] = float(conj_w_z(pots.V_z, pots.R, -zeta)) / ez
    return d


def solve_viscous(cfg: SolverConfig, E, pots: Potentials, u0, z0) -> Trajectory:
    """March the incremental scheme over [0, T] with uniform step tau."""
    if cfg.step_ratio >= 1.0:
        warnings.warn(f"tau / min(eps^alpha, eps) = {cfg.step_ratio:.3g} >= 1; "
                      "the scheme does not resolve the viscous time scales", StepSizeWarning, stacklevel=2)
    N = cfg.n_steps
    if not math.isclose(N * cfg.tau, cfg.T, rel_tol=1e-9):
        raise ValueError("T must be an integer multiple of tau")
    u0 = np.atleast_1d(np.asarray(u0, dtype=float)).reshape(pots.dim_u)
    z0 = np.asarray(z0, dtype=float).reshape(pots.dim_z)
    t = np.linspace(0.0, cfg.T, N + 1)
    n, m = u0.size, z0.size
    U, Z = np.empty((N + 1, n)), np.empty((N + 1, m))
    MU, ZETA, SIG = np.empty((N + 1, n)), np.empty((N + 1, m)), np.zeros((N + 1, m))
    L = np.zeros((N + 1, 5))
    its = np.zeros(N + 1, dtype=int)
    U[0], Z[0] = u0, z0
    MU[0], ZETA[0] = E.grad_u(0.0, u0, z0), E.grad_z(0.0, u0, z0)
    u, z = u0, z0
    for k in range(1, N + 1):
        # linear extrapolation as warm start
        ug = 2 * u - U[k - 2] if k > 1 else u
        zg = 2 * z - Z[k - 2] if k > 1 else z
        try:
            un, zn, its[k] = incremental_step(cfg, E, pots, t[k], u, z, ug, zg)
        except SolverError:
            un, zn, its[k] = incremental_step(cfg, E, pots, t[k], u, z)
        mu, zeta, sig = _multipliers(E, pots, cfg, t[k], u, z, un, zn)
        U[k], Z[k], MU[k], ZETA[k], SIG[k] = un, zn, mu, zeta, sig
        L[k] = _ledger_row(pots, cfg, un - u, zn - z, mu, zeta)
        u, z = un, zn
    return Trajectory(t, U, Z, MU, ZETA, SIG, L, cfg, its)


# --------------------------------------------------------------------------
# audits


def ed_balance_residual(traj: Trajectory, E, pots: Potentials = None, cfg: SolverConfig = None):
    """Per-step and cumulative energy-dissipation residual

        E(t_n, q_n) + tau d_n - E(t_{n-1}, q_{n-1}) - P_n,

    with d_n the ledger sum and P_n = E(t_n, q_{n-1}) - E(t_{n-1}, q_{n-1})
    the exact power integral along the frozen state.

    Returns ``(per_step, cumulative)`` arrays of length N.
    """
    tau = traj.cfg.tau
    N = traj.n_steps
    per = np.empty(N)
    for k in range(1, N + 1):
        e_new = E.value(traj.t[k], traj.u[k], traj.z[k])
        e_frozen = E.value(traj.t[k], traj.u[k - 1], traj.z[k - 1])
        per[k - 1] = e_new - e_frozen + tau * traj.ledger[k].sum()
    return per, np.cumsum(per)


@dataclass(frozen=True)
class AprioriStats:
    R_var: float
    u_L1: float
    z_L1: float
    sup_E: float
    bound_z_L1: float
    bound_u_L1: float


def apriori_stats(traj: Trajectory, E=None, pots: Potentials = None) -> AprioriStats:
    """Discrete L1 norms of u', z', the R-variation and sup of the energy,
    with the a priori bounds when the instance provides the constants."""
    du = np.diff(traj.u, axis=0)
    dz = np.diff(traj.z, axis=0)
    u_L1 = float(np.linalg.norm(du, axis=1).sum()) if du.shape[1] else 0.0
    z_L1 = float(np.linalg.norm(dz, axis=1).sum()) if dz.shape[1] else 0.0
    R_var = float(sum(eval_rate(pots.R, d) for d in dz)) if (pots is not None and dz.shape[1]) else math.nan
    sup_E = math.nan
    bz = bu = math.nan
    if E is not None:
        energies = np.array([E.value(t, u, z) for t, u, z in zip(traj.t, traj.u, traj.z)])
        sup_E = float(energies.max())
        e0 = float(energies[0])
        powers = np.array([abs(E.power(t, u, z)) for t, u, z in zip(traj.t, traj.u, traj.z)])
        # power control |dE/dt| <= C E, C read off the trajectory
        C = float(np.max(powers / np.maximum(energies, 1e-300)))
        growth = math.exp(C * traj.cfg.T)
        if pots is not None and dz.shape[1]:
            bz = growth * e0 / pots.R.c_lower
        if hasattr(E, "A") and du.shape[1] and pots is not None \
                and np.allclose(pots.V_u.weight, np.eye(du.shape[1])):
            lam = float(np.linalg.eigvalsh(E.A).min())
            Cu = float(np.linalg.norm(E.B.T, 2)) if E.B.size else 0.0
            if lam > 0:
                # discrete version of  Lam |u'|_L1 <= |f'|_L1 + C_u |z'|_L1 + |D_u E(0, q0)|
                f_var = float(np.linalg.norm(np.diff(E.f(traj.t), axis=0), axis=1).sum())
                g0 = float(np.linalg.norm(E.grad_u(0.0, traj.u[0], traj.z[0])))
                bu = (f_var + Cu * z_L1 + g0) / lam
    return AprioriStats(R_var, u_L1, z_L1, sup_E, bz, bu)

"""Analysis of vanishing-viscosity limits: the limiting M-function, regime
classification by the switching conditions, jump detection, transition costs
and the total variation, and the BV-solution audit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import optimize

from .contact import JointBQuery, joint_b, p_constant
from .energy import slopes
from .energy import QuadraticEnergy
from .potentials import (
    Potentials,
    conj_viscous,
    conj_viscous_grad,
    conj_w_z,
    conj_w_z_grad,
    eval_rate,
)
from .rescale import ParamCurve

__all__ = [
    "ALLOWED_LABELS",
    "ClassifyTolerances",
    "RegimeLabel",
    "Plateau",
    "TransitionCurve",
    "JumpRecord",
    "BVCandidate",
    "BVReport",
    "m_eps",
    "classify_regime",
    "classify_curve",
    "detect_jumps",
    "finsler_cost",
    "bv_candidate",
    "compute_jump_costs",
    "total_variation",
    "check_bv",
]

ALLOWED_LABELS = {
    "gt1": ("EuRz", "EuVz", "Bz"),
    "eq1": ("EuRz", "Vuz", "BuBz"),
    "lt1": ("EuRz", "VuRz", "Bu"),
}


def _alpha_case(alpha):
    return "eq1" if alpha == 1.0 else ("gt1" if alpha > 1.0 else "lt1")


def allowed_labels(alpha):
    return ALLOWED_LABELS[_alpha_case(alpha)]


def m_eps(alpha, eps, t, u, z, dt, du, dz, E, pots: Potentials):
    """M_eps(t, q, t', q') = joint B-function at the slopes of (t, q)."""
    sl = slopes(E, pots, t, np.asarray(u, float), np.asarray(z, float))
    return joint_b(JointBQuery(dt, du, dz, sl.s_u, sl.s_z, alpha, eps), pots)


# --------------------------------------------------------------------------
# regimes


@dataclass(frozen=True)
class ClassifyTolerances:
    """Thresholds of the regime classification.

    ``tol_t``: t' below this counts as frozen time.  ``tol_s``: slopes below
    this count as zero.  ``tol_v``: speeds below this count as zero.
    ``tol_class``: relative tolerance for lambda_u = lambda_z.  ``lam_lo`` /
    ``lam_hi``: lambda at most ``lam_lo`` counts as 0, at least ``lam_hi`` as
    infinity; ``None`` derives them from eps and alpha.
    """

    tol_t: float = 1e-3
    tol_s: float = 1e-6
    tol_v: float = 1e-6
    tol_class: float = 0.05
    lam_lo: Optional[float] = None
    lam_hi: Optional[float] = None

    def thresholds(self, eps, alpha):
        if self.lam_lo is not None:
            lo = self.lam_lo
            return lo, (self.lam_hi if self.lam_hi is not None else 1.0 / lo)
        gamma = abs(alpha - 1.0) / 2.0 if alpha != 1.0 else 0.5
        lo = max(eps, 1e-300) ** gamma
        return lo, 1.0 / lo


@dataclass(frozen=True)
class RegimeLabel:
    label: str
    lambda_u: float
    lambda_z: float
    residual: float
    flag: str = ""


def _recover_lambda(force, speed, Winv, W, tol_f, tol_v):
    """lambda with force = lambda W speed; nan when both vanish."""
    if force.size == 0:
        return math.nan
    fn = math.sqrt(max(float(force @ Winv @ force), 0.0))
    vn = math.sqrt(max(float(speed @ W @ speed), 0.0))
    if vn <= tol_v:
        return math.inf if fn > tol_f else math.nan
    return fn / vn


def _categories(lam, lo, hi):
    """Subset of {'0', 'V', 'inf'} consistent with a recovered lambda."""
    if math.isnan(lam):
        return {"0", "V", "inf"}
    if lam <= lo:
        return {"0"}
    if lam >= hi:
        return {"inf"}
    return {"V"}


def classify_regime(alpha, eps, dt, du, dz, mu, zeta, s_u, s_z, pots: Potentials,
                    tol: ClassifyTolerances = ClassifyTolerances()) -> RegimeLabel:
    """Label one node of a parametrised curve by the switching conditions.

    ``mu`` and ``zeta`` are the energy gradients at the node.  lambda_u solves
    -mu = lambda_u W_u u', lambda_z solves -zeta - sigma = lambda_z W_z z'
    with sigma the projection of -zeta onto the stable box.
    """
    du, dz = np.atleast_1d(du), np.atleast_1d(dz)
    mu, zeta = np.atleast_1d(mu), np.atleast_1d(zeta)
    tol_f = math.sqrt(2.0 * tol.tol_s)
    lam_u = math.nan
    lam_z = math.nan
    if du.size:
        lam_u = _recover_lambda(-mu, du, pots.V_u.weight_inv, pots.V_u.weight, tol_f, tol.tol_v)
    if dz.size:
        off = -zeta - pots.R.stable_set.project(-zeta)
        lam_z = _recover_lambda(off, dz, pots.V_z.weight_inv, pots.V_z.weight, tol_f, tol.tol_v)
    lo, hi = tol.thresholds(eps, alpha)
    cu, cz = _categories(lam_u, lo, hi), _categories(lam_z, lo, hi)
    # a vanishing slope is compatible with lambda = 0 whatever the speed
    if s_u <= tol.tol_s:
        cu = cu | {"0"}
    if s_z <= tol.tol_s:
        cz = cz | {"0"}
    res = max(s_u, s_z)
    if dt > tol.tol_t:
        if "0" in cu and "0" in cz:
            return RegimeLabel("EuRz", lam_u, lam_z, res)
        return RegimeLabel("Unclassified", lam_u, lam_z, res, "conflict")
    case = _alpha_case(alpha)
    fits = []
    if case == "gt1":
        if "0" in cu and "0" in cz:
            fits.append("EuRz")
        if "0" in cu and "V" in cz:
            fits.append("EuVz")
        if "inf" in cz:
            fits.append("Bz")
    elif case == "lt1":
        if "0" in cu and "0" in cz:
            fits.append("EuRz")
        if "V" in cu and "0" in cz:
            fits.append("VuRz")
        if "inf" in cu:
            fits.append("Bu")
    else:
        if "0" in cu and "0" in cz:
            fits.append("EuRz")
        if "V" in cu and "V" in cz:
            both = not (math.isnan(lam_u) or math.isnan(lam_z))
            rel = abs(lam_u - lam_z) / max(lam_u, lam_z) if both else 0.0
            if rel <= tol.tol_class:
                fits.append("Vuz")
            res = max(res, rel)
        if "inf" in cu and "inf" in cz:
            fits.append("BuBz")
    if not fits:
        return RegimeLabel("Unclassified", lam_u, lam_z, res, "conflict")
    return RegimeLabel(fits[0], lam_u, lam_z, res, "indeterminate" if len(fits) > 1 else "")


def classify_curve(curve: ParamCurve, pots: Potentials, tol: ClassifyTolerances = ClassifyTolerances()):
    """Label every node; stores the labels on ``curve.labels`` and returns them."""
    if curve.mu is None:
        raise ValueError("curve carries no slopes; reparametrize with E and pots")
    labels = [classify_regime(curve.alpha, curve.eps, curve.dt[k], curve.du[k], curve.dz[k],
                              curve.mu[k], curve.zeta[k], curve.slope_u[k], curve.slope_z[k], pots, tol)
              for k in range(curve.n_nodes)]
    curve.labels = labels
    return labels


# --------------------------------------------------------------------------
# jumps


@dataclass(frozen=True)
class Plateau:
    i0: int
    i1: int
    s0: float
    s1: float
    t_star: float
    u_minus: np.ndarray
    z_minus: np.ndarray
    u_plus: np.ndarray
    z_plus: np.ndarray


def detect_jumps(curve: ParamCurve, tol_t: float) -> List[Plateau]:
    """Maximal runs of nodes with t' <= tol_t."""
    frozen = curve.dt <= tol_t
    out = []
    k, N = 0, curve.n_nodes
    while k < N:
        if not frozen[k]:
            k += 1
            continue
        j = k
        while j + 1 < N and frozen[j + 1]:
            j += 1
        i0, i1 = max(k - 1, 0), min(j + 1, N - 1)
        if i1 > i0:
            out.append(Plateau(i0, i1, curve.s[i0], curve.s[i1], 0.5 * (curve.t[i0] + curve.t[i1]),
                               curve.u[i0].copy(), curve.z[i0].copy(), curve.u[i1].copy(), curve.z[i1].copy()))
        k = j + 1
    return out


@dataclass
class TransitionCurve:
    u: np.ndarray
    z: np.ndarray
    value: float
    converged: bool
    penalty: float = 0.0

    @property
    def n_nodes(self):
        return self.u.shape[0]


def _batch_hessian(E, t, U, Z):
    if isinstance(E, QuadraticEnergy):
        K = E.hessian()
        return np.broadcast_to(K, (U.shape[0],) + K.shape)
    return np.stack([E.hessian(t, u, z) for u, z in zip(U, Z)])


def _visc_and_grad(V, D):
    """Row-wise V(d) and its gradient for a p-homogeneous V."""
    if D.shape[1] == 0:
        return np.zeros(D.shape[0]), D
    WD = D @ V.weight
    r2 = np.maximum(np.sum(D * WD, axis=1), 0.0)
    val = r2 ** (V.p / 2.0) / V.p
    if V.p == 2.0:
        return val, WD
    fac = np.where(r2 > 0, np.maximum(r2, 1e-300) ** (V.p / 2.0 - 1.0), 0.0)
    return val, fac[:, None] * WD


def _action_grad(alpha, t, E, pots: Potentials, Q, penalty, smooth):
    """Midpoint-rule action of the smoothed M_0 at frozen time and its
    gradient with respect to all nodes (p-homogeneous potentials).

    Kinks are smoothed with ``smooth``: |x| -> sqrt(x^2 + d^2) - d in R,
    V -> V + d^p and slopes s -> s + d^2.  The infinite branches of
    alpha != 1 become penalty * sqrt(s_blocking + d^2) * |blocked rate|.
    """
    n, m = pots.dim_u, pots.dim_z
    k = Q.shape[0] - 1
    h = 1.0 / k
    Qm = 0.5 * (Q[1:] + Q[:-1])
    D = np.diff(Q, axis=0) / h
    Um, Zm, dU, dZ = Qm[:, :n], Qm[:, n:], D[:, :n], D[:, n:]
    mu = E.grad_u(t, Um, Zm)
    zeta = E.grad_z(t, Um, Zm)
    Hk = _batch_hessian(E, t, Um, Zm)
    if n:
        s_u = np.atleast_1d(conj_viscous(pots.V_u, -mu))
        ds_u = -np.einsum("kij,ki->kj", Hk[:, :n, :], conj_viscous_grad(pots.V_u, -mu))
    else:
        s_u, ds_u = np.zeros(k), np.zeros((k, n + m))
    if m:
        s_z = np.atleast_1d(conj_w_z(pots.V_z, pots.R, -zeta))
        ds_z = -np.einsum("kij,ki->kj", Hk[:, n:, :], conj_w_z_grad(pots.V_z, pots.R, -zeta))
    else:
        s_z, ds_z = np.zeros(k), np.zeros((k, n + m))
    d2 = smooth * smooth
    F = np.zeros(k)
    dFd = np.zeros((k, n + m))
    dFsu = np.zeros(k)
    dFsz = np.zeros(k)
    if m:
        kp, km = pots.R.kappa_plus, pots.R.kappa_minus
        a = np.sqrt(dZ * dZ + d2)
        F += np.sum(0.5 * (kp + km) * (a - smooth) + 0.5 * (kp - km) * dZ, axis=1)
        dFd[:, n:] += 0.5 * (kp + km) * dZ / np.maximum(a, 1e-300) + 0.5 * (kp - km)
    vu, gvu = _visc_and_grad(pots.V_u, dU)
    vz, gvz = _visc_and_grad(pots.V_z, dZ)

    def contact_term(V, S, p):
        """c_p (V + d^p)^{1/p} S^{1/p'} with partial derivatives."""
        c = p_constant(p)
        q = p / (p - 1.0)
        base = np.maximum(V + smooth ** p, 1e-300)
        Sg = np.maximum(S, 1e-300)
        val = c * base ** (1.0 / p) * Sg ** (1.0 / q)
        dV = np.where(V + smooth ** p > 0, c / p * base ** (1.0 / p - 1.0) * Sg ** (1.0 / q), 0.0)
        dS = c / q * base ** (1.0 / p) * Sg ** (1.0 / q - 1.0)
        return val, dV, dS

    if alpha == 1.0:
        p = pots.V_u.p if n else pots.V_z.p
        val, dV, dS = contact_term(vu + vz, s_u + s_z + d2, p)
        F += val
        dFd[:, :n] += dV[:, None] * gvu
        dFd[:, n:] += dV[:, None] * gvz
        dFsu += dS
        dFsz += dS
    else:
        if n:
            val, dV, dS = contact_term(vu, s_u + d2, pots.V_u.p)
            F += val
            dFd[:, :n] += dV[:, None] * gvu
            dFsu += dS
        if m:
            val, dV, dS = contact_term(vz, s_z + d2, pots.V_z.p)
            F += val
            dFd[:, n:] += dV[:, None] * gvz
            dFsz += dS
        blk, sb, cols = (dZ, s_u, slice(n, n + m)) if alpha > 1.0 else (dU, s_z, slice(0, n))
        if blk.shape[1] and penalty > 0:
            nb = np.sqrt(np.sum(blk * blk, axis=1) + d2)
            rs = np.sqrt(np.maximum(sb, 0.0) + d2)
            F += penalty * rs * (nb - smooth)
            dFd[:, cols] += (penalty * rs / np.maximum(nb, 1e-300))[:, None] * blk
            dpen = penalty * (nb - smooth) * 0.5 / np.maximum(rs, 1e-300)
            if alpha > 1.0:
                dFsu += dpen
            else:
                dFsz += dpen
    dFm = dFsu[:, None] * ds_u + dFsz[:, None] * ds_z
    G = np.zeros_like(Q)
    G[:-1] += h * (0.5 * dFm) - dFd
    G[1:] += h * (0.5 * dFm) + dFd
    return float(h * F.sum()), G


def _spacing_penalty(Q, w):
    """w * sum_i (|dQ_i| - mean |dQ|)^2 and its gradient."""
    D = np.diff(Q, axis=0)
    ln = np.sqrt(np.sum(D * D, axis=1))
    dev = ln - ln.mean()
    unit = D / np.maximum(ln, 1e-300)[:, None]
    gD = (2.0 * w * dev)[:, None] * unit
    G = np.zeros_like(Q)
    G[:-1] -= gD
    G[1:] += gD
    return float(w * np.sum(dev * dev)), G


def _supports_gradient(alpha, pots):
    Vu, Vz = pots.V_u, pots.V_z
    ok = (not pots.dim_u or Vu.kind == "phom") and (not pots.dim_z or Vz.is_quadratic)
    if alpha == 1.0 and pots.dim_u and pots.dim_z:
        ok = ok and Vu.p == Vz.p
    return ok


def _action(alpha, t, E, pots, Q, penalty=0.0, smooth=0.0):
    """Smoothed action; numeric fallback for potentials without closed forms."""
    if _supports_gradient(alpha, pots):
        return _action_grad(alpha, t, E, pots, Q, penalty, smooth)[0]
    return _exact_action(alpha, t, E, pots, Q)


def finsler_cost(alpha, t_star, u_minus, z_minus, u_plus, z_plus, E, pots: Potentials,
                 n_nodes=64, init=None, maxiter=5000, spacing_weight=10.0):
    """Discrete transition cost between two states at frozen time.

    Minimises the midpoint-rule action of M_0(t*, theta, 0, theta') over the
    interior nodes of a curve with ``n_nodes`` nodes joining the two states
    (quasi-Newton on a smoothed integrand, smoothing driven down over
    continuation rounds; for alpha != 1 the infinite branches carry a
    penalty doubled on each round).  ``init`` optionally supplies a starting
    curve as stacked states ``(k, dim_u + dim_z)``; the straight segment is
    always tried as well and the better result is returned.

    Returns ``(value, TransitionCurve)``, with ``value`` the exact
    (unsmoothed, unpenalised) discrete action of the returned curve.
    """
    n, m = pots.dim_u, pots.dim_z
    u_minus = np.atleast_1d(np.asarray(u_minus, float))[:n]
    z_minus = np.atleast_1d(np.asarray(z_minus, float))[:m]
    u_plus = np.atleast_1d(np.asarray(u_plus, float))[:n]
    z_plus = np.atleast_1d(np.asarray(z_plus, float))[:m]
    r = np.linspace(0.0, 1.0, n_nodes)[:, None]
    qa = np.concatenate([u_minus, z_minus])
    qb = np.concatenate([u_plus, z_plus])
    if np.allclose(qa, qb, rtol=0, atol=1e-14):
        Q = np.repeat(qa[None], n_nodes, axis=0)
        return 0.0, TransitionCurve(Q[:, :n], Q[:, n:], 0.0, True)
    starts = [qa + r * (qb - qa)]
    if init is not None:
        init = np.asarray(init, dtype=float)
        # resample the supplied curve uniformly in its own arclength
        seg = np.linalg.norm(np.diff(init, axis=0), axis=1)
        s_old = np.concatenate([[0.0], np.cumsum(seg)])
        if s_old[-1] > 0:
            s_old /= s_old[-1]
            keep = np.concatenate([[True], np.diff(s_old) > 0])
            Q0 = np.column_stack([np.interp(r[:, 0], s_old[keep], init[keep, j]) for j in range(n + m)])
            Q0[0], Q0[-1] = qa, qb
            starts.append(Q0)
    scale = float(np.linalg.norm(qb - qa))
    use_grad = _supports_gradient(alpha, pots)
    # Uniform node spacing is enforced by a penalty that vanishes on
    # constant-speed curves; without it the optimiser exploits the quadrature
    # with a few long segments.  The action is invariant under
    # reparametrisation, so the penalty does not bias the continuum problem.
    w_space = spacing_weight * max(_exact_action(alpha, t_star, E, pots, starts[0]), 1e-12) \
        * (n_nodes - 1) / scale ** 2
    best = None
    for Q0 in starts:
        x = Q0[1:-1].ravel().copy()
        penalty = 0.0 if alpha == 1.0 else 10.0
        converged = True
        for smooth in scale * np.array([1e-2, 1e-3, 1e-4, 1e-5, 1e-6]):
            def f(xv, smooth=smooth, penalty=penalty):
                Q = np.vstack([qa, xv.reshape(n_nodes - 2, n + m), qb])
                sp, gsp = _spacing_penalty(Q, w_space)
                if use_grad:
                    val, G = _action_grad(alpha, t_star, E, pots, Q, penalty, smooth)
                    return val + sp, (G + gsp)[1:-1].ravel()
                return _exact_action(alpha, t_star, E, pots, Q) + sp
            res = optimize.minimize(f, x, jac=use_grad, method="L-BFGS-B",
                                    options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-12,
                                             "maxfun": 4 * maxiter, "maxcor": 30})
            x = res.x
            converged = res.status in (0, 2)
            if alpha != 1.0:
                penalty *= 2.0
        Q = np.vstack([qa, x.reshape(n_nodes - 2, n + m), qb])
        val = _exact_action(alpha, t_star, E, pots, Q)
        pen_val = _action(alpha, t_star, E, pots, Q, penalty, 0.0)
        cand = TransitionCurve(Q[:, :n], Q[:, n:], val, converged, pen_val - val)
        if best is None or cand.value < best.value:
            best = cand
    if not best.converged:
        warnings.warn("transition-cost optimiser did not converge; reporting best value", RuntimeWarning)
    return best.value, best


def _exact_action(alpha, t, E, pots, Q, tol=1e-10):
    n = pots.dim_u
    k = Q.shape[0] - 1
    h = 1.0 / k
    total = 0.0
    for i in range(k):
        qm = 0.5 * (Q[i] + Q[i + 1])
        dq = (Q[i + 1] - Q[i]) / h
        sl = slopes(E, pots, t, qm[:n], qm[n:])
        su = sl.s_u if sl.s_u > tol else 0.0
        sz = sl.s_z if sl.s_z > tol else 0.0
        du, dz = dq[:n], dq[n:]
        du = np.where(np.abs(du) > tol, du, 0.0)
        dz = np.where(np.abs(dz) > tol, dz, 0.0)
        total += h * joint_b(JointBQuery(0.0, du, dz, su, sz, alpha, 0.0), pots)
    return total


# --------------------------------------------------------------------------
# BV candidates


@dataclass
class JumpRecord:
    t_star: float
    u_minus: np.ndarray
    z_minus: np.ndarray
    u_at: np.ndarray
    z_at: np.ndarray
    u_plus: np.ndarray
    z_plus: np.ndarray
    index: int
    cost_left: Optional[float] = None
    cost_right: Optional[float] = None
    curve_left: Optional[TransitionCurve] = None
    curve_right: Optional[TransitionCurve] = None
    energy_drop: Optional[float] = None
    path: Optional[np.ndarray] = None

    @property
    def cost(self):
        return (self.cost_left or 0.0) + (self.cost_right or 0.0)


@dataclass
class BVCandidate:
    """A curve t -> q(t) sampled on ``t`` with jumps between consecutive
    samples ``index`` and ``index + 1`` of each jump record."""

    t: np.ndarray
    u: np.ndarray
    z: np.ndarray
    jumps: List[JumpRecord] = field(default_factory=list)

    def jump_gaps(self):
        return {j.index for j in self.jumps}


def bv_candidate(curve: ParamCurve, plateaus: List[Plateau]) -> BVCandidate:
    """Collapse each plateau of a parametrised curve to a jump.  The value at
    the jump time is taken to be the right limit."""
    keep = np.ones(curve.n_nodes, dtype=bool)
    for p in plateaus:
        keep[p.i0 + 1:p.i1] = False
    idx = np.flatnonzero(keep)
    pos = {i: k for k, i in enumerate(idx)}
    jumps = []
    for p in plateaus:
        path = np.column_stack([curve.u[p.i0:p.i1 + 1], curve.z[p.i0:p.i1 + 1]])
        jumps.append(JumpRecord(p.t_star, p.u_minus, p.z_minus, p.u_plus, p.z_plus, p.u_plus, p.z_plus,
                                pos[p.i0], path=path))
    return BVCandidate(curve.t[idx].copy(), curve.u[idx].copy(), curve.z[idx].copy(), jumps)


def compute_jump_costs(alpha, cand: BVCandidate, E, pots: Potentials, n_nodes=64):
    """Fill in costs, transition curves and energy drops of all jumps."""
    n = pots.dim_u
    for j in cand.jumps:
        v, c = finsler_cost(alpha, j.t_star, j.u_minus, j.z_minus, j.u_at, j.z_at, E, pots, n_nodes,
                            init=j.path)
        j.cost_left, j.curve_left = v, c
        v, c = finsler_cost(alpha, j.t_star, j.u_at, j.z_at, j.u_plus, j.z_plus, E, pots, n_nodes)
        j.cost_right, j.curve_right = v, c
        j.energy_drop = E.value(j.t_star, j.u_minus, j.z_minus) - E.value(j.t_star, j.u_plus, j.z_plus)
    return cand


def _rate_var(pots, Z, skip=()):
    if Z.shape[1] == 0:
        return 0.0
    d = np.diff(Z, axis=0)
    w = np.ones(d.shape[0], dtype=bool)
    for k in skip:
        w[k] = False
    return float(np.sum(eval_rate(pots.R, d[w])))


def total_variation(alpha, cand: BVCandidate, pots: Potentials, interval=None, tol=1e-8):
    """R-variation on the continuous pieces plus the jump contributions.

    Each jump adds R(z(t)-z-) + R(z+ - z(t)) plus the two brackets
    cost - R(increment), i.e. the two costs; a bracket below ``-tol`` is an
    integrity error.  ``interval`` restricts to [a, b] (jumps inside it count
    fully).
    """
    t = cand.t
    lo, hi = (t[0], t[-1]) if interval is None else interval
    sel = np.flatnonzero((t >= lo - 1e-12) & (t <= hi + 1e-12))
    if sel.size == 0:
        return 0.0
    a, b = sel[0], sel[-1]
    gaps = {j.index for j in cand.jumps}
    skip = [k - a for k in gaps if a <= k < b]
    var = _rate_var(pots, cand.z[a:b + 1], skip)
    m = pots.dim_z
    for j in cand.jumps:
        if not (a <= j.index < b):
            continue
        if j.cost_left is None:
            raise ValueError("jump costs not computed; call compute_jump_costs first")
        for cost, z0, z1 in ((j.cost_left, j.z_minus, j.z_at), (j.cost_right, j.z_at, j.z_plus)):
            rz = float(eval_rate(pots.R, z1 - z0)) if m else 0.0
            if cost - rz < -tol * max(1.0, rz):
                raise ArithmeticError(f"transition cost {cost} below R-increment {rz}")
            var += cost
    return var


@dataclass
class BVReport:
    stationarity_max: float
    stability_max: float
    balance_residual: float
    jump_gaps: List[float]
    variation: float


def check_bv(alpha, cand: BVCandidate, E, pots: Potentials) -> BVReport:
    """Stationarity and local stability off the jump set, the energy balance
    over [0, T] and per-jump gaps energy drop - cost."""
    su = np.array([slopes(E, pots, t, u, z).s_u for t, u, z in zip(cand.t, cand.u, cand.z)])
    sz = np.array([slopes(E, pots, t, u, z).s_z for t, u, z in zip(cand.t, cand.u, cand.z)])
    var = total_variation(alpha, cand, pots)
    gaps = {j.index for j in cand.jumps}
    P = np.array([E.power(t, u, z) for t, u, z in zip(cand.t, cand.u, cand.z)])
    dt = np.diff(cand.t)
    seg = 0.5 * (P[1:] + P[:-1]) * dt
    for k in gaps:
        seg[k] = 0.0
    work = float(seg.sum())
    e0 = E.value(cand.t[0], cand.u[0], cand.z[0])
    e1 = E.value(cand.t[-1], cand.u[-1], cand.z[-1])
    bal = e1 + var - e0 - work
    jg = [j.energy_drop - j.cost for j in cand.jumps]
    return BVReport(float(su.max(initial=0.0)), float(sz.max(initial=0.0)), bal, jg, var)

"""B-functions and vanishing-viscosity contact potentials.

For a viscous potential psi the B-function is

    B(tau, v, sigma) = tau * psi(v / tau) + tau * sigma,       tau > 0,

and the contact potential is its infimum over tau > 0.  The rescaled joint
B-function couples a u-part relaxing on the time scale eps**alpha with a
z-part relaxing on the scale eps; ``eps = 0`` selects its Mosco limit.

Values live in [0, inf]; ``math.inf`` stands for +infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .potentials import Potentials, RatePotential, ViscousPotential, eval_rate, eval_viscous

__all__ = [
    "LimitRequired",
    "BQuery",
    "JointBQuery",
    "b_function",
    "contact_potential",
    "contact_optimizer",
    "contact_numeric",
    "tau_infimum",
    "kappa_zeta",
    "joint_b",
    "joint_contact",
    "mosco_recovery_tau",
    "lower_bound_check",
    "p_constant",
]

LOG_TAU_RANGE = (-12.0, 12.0)


class LimitRequired(ValueError):
    """The plain B-function is not defined at tau = 0."""


@dataclass(frozen=True)
class BQuery:
    tau: float
    v: np.ndarray
    sigma: float

    def __post_init__(self):
        if self.tau < 0 or self.sigma < 0:
            raise ValueError("tau and sigma must be nonnegative")
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=float)))


@dataclass(frozen=True)
class JointBQuery:
    tau: float
    u_rate: np.ndarray
    z_rate: np.ndarray
    sigma_u: float
    sigma_z: float
    alpha: float
    eps: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if min(self.tau, self.sigma_u, self.sigma_z, self.eps) < 0:
            raise ValueError("tau, sigma_u, sigma_z, eps must be nonnegative")
        object.__setattr__(self, "u_rate", np.atleast_1d(np.asarray(self.u_rate, dtype=float)))
        object.__setattr__(self, "z_rate", np.atleast_1d(np.asarray(self.z_rate, dtype=float)))


def p_constant(p):
    """c_p = p**(1/p) * p'**(1/p') with 1/p + 1/p' = 1."""
    q = p / (p - 1.0)
    return p ** (1.0 / p) * q ** (1.0 / q)


def b_function(psi: ViscousPotential, q: BQuery, rate: Optional[RatePotential] = None):
    """tau psi(v/tau) + tau sigma, with psi optionally augmented by a rate part."""
    if q.tau == 0.0:
        raise LimitRequired("B-function at tau = 0: use contact_potential or joint_b")
    val = q.tau * float(eval_viscous(psi, q.v / q.tau)) + q.tau * q.sigma
    if rate is not None:
        val += float(eval_rate(rate, q.v))
    return val


# --------------------------------------------------------------------------
# one-dimensional infimum over tau


def tau_infimum(g: Callable[[float], float], log_range=LOG_TAU_RANGE, n_scan=97, xtol=1e-12):
    """Minimise a function of tau that is convex in tau over log10 tau in
    ``log_range``.  Returns ``(value, tau_opt)``; ``tau_opt`` sits on the
    range boundary when the infimum is not attained inside it."""
    lo, hi = log_range
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([g(10.0 ** x) for x in grid])
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_scan - 1)]
    res = optimize.minimize_scalar(lambda x: g(10.0 ** x), bounds=(a, b), method="bounded",
                                   options={"xatol": xtol})
    if res.fun <= vals[k]:
        return float(res.fun), 10.0 ** float(res.x)
    return float(vals[k]), 10.0 ** float(grid[k])


def contact_numeric(psi_fun: Callable[[np.ndarray], float], v, sigma):
    """inf over tau > 0 of tau psi(v/tau) + tau sigma for a callable psi."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return tau_infimum(lambda t: t * float(psi_fun(v / t)) + t * sigma)[0]


def _contact_c(v, sigma):
    v1, v2 = v
    if v1 * v1 >= (2.0 * sigma - 1.0) * v2 * v2:
        return math.hypot(v1, v2) * math.sqrt(2.0 * sigma)
    return 0.5 * math.sqrt(2.0 * v1 * v1 + v2 * v2) * math.sqrt(4.0 * sigma - 1.0) + 0.5 * abs(v2)


def contact_potential(psi: ViscousPotential, v, sigma, rate: Optional[RatePotential] = None,
                      method="auto"):
    """b_psi(v, sigma) = inf_{tau > 0} tau psi(v/tau) + tau sigma.

    Parameters
    ----------
    psi : ViscousPotential
    v : array_like
    sigma : float
        Nonnegative slope value.
    rate : RatePotential, optional
        A 1-homogeneous part added to psi; it simply adds R(v).
    method : {"auto", "numeric"}
        "auto" uses closed forms when the potential admits one.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    extra = float(eval_rate(rate, v)) if rate is not None else 0.0
    if not np.any(v):
        return extra
    if sigma == 0.0:
        return extra + float(psi.ri_part(v))
    if method == "auto":
        if psi.kind == "phom":
            p = psi.p
            return extra + float(eval_viscous(psi, v)) ** (1.0 / p) * p_constant(p) * sigma ** ((p - 1.0) / p)
        if psi.kind == "norm":
            return extra + float(np.linalg.norm(v)) * kappa_zeta(psi.profile, sigma, psi.profile_slope0)
        if psi.kind == "custom_c":
            return extra + _contact_c(v, sigma)
        if psi.kind == "custom_d" and v[0] == 0.0:
            return extra + abs(v[1]) * (4.0 * sigma / 3.0) ** 0.75
    elif method != "numeric":
        raise ValueError(f"unknown method {method!r}")
    return extra + contact_numeric(lambda w: eval_viscous(psi, w), v, sigma)


def contact_optimizer(psi: ViscousPotential, v, sigma):
    """The tau attaining b_psi(v, sigma); ``inf`` when it is not attained."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.any(v):
        return 0.0
    if sigma == 0.0:
        return math.inf
    if psi.kind == "phom":
        return ((psi.p - 1.0) * float(eval_viscous(psi, v)) / sigma) ** (1.0 / psi.p)
    return tau_infimum(lambda t: t * float(eval_viscous(psi, v / t)) + t * sigma)[1]


def kappa_zeta(profile: Callable[[float], float], sigma, slope0=0.0):
    """kappa(sigma) = inf_{tau > 0} tau profile(1/tau) + tau sigma.

    ``slope0`` is profile'(0), the value at sigma = 0.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return float(slope0)
    return tau_infimum(lambda t: t * float(profile(1.0 / t)) + t * sigma)[0]


# --------------------------------------------------------------------------
# joint B-function


def joint_contact(pots: Potentials, u_rate, z_rate, sigma):
    """Contact potential of psi_u (+) psi_z at ((u', z'), sigma), psi_z = R + V_z."""
    u_rate = np.atleast_1d(np.asarray(u_rate, dtype=float))
    z_rate = np.atleast_1d(np.asarray(z_rate, dtype=float))
    rpart = float(eval_rate(pots.R, z_rate)) if z_rate.size else 0.0
    Vu, Vz = pots.V_u, pots.V_z

    def visc(a, b):
        return (float(eval_viscous(Vu, a)) if a.size else 0.0) + (float(eval_viscous(Vz, b)) if b.size else 0.0)

    if not (np.any(u_rate) or np.any(z_rate)):
        return rpart
    if sigma == 0.0:
        ri = (float(Vu.ri_part(u_rate)) if u_rate.size else 0.0) + (float(Vz.ri_part(z_rate)) if z_rate.size else 0.0)
        return rpart + ri
    same_p = (Vu.kind == "phom" or not u_rate.size) and (Vz.kind == "phom" or not z_rate.size)
    if same_p and (not u_rate.size or not z_rate.size or Vu.p == Vz.p):
        p = Vu.p if u_rate.size else Vz.p
        return rpart + visc(u_rate, z_rate) ** (1.0 / p) * p_constant(p) * sigma ** ((p - 1.0) / p)
    return rpart + tau_infimum(lambda t: t * visc(u_rate / t, z_rate / t) + t * sigma)[0]


def _psi_z_contact(pots, z_rate, sigma):
    if not z_rate.size:
        return 0.0
    return contact_potential(pots.V_z, z_rate, sigma, rate=pots.R)


def _psi_u_contact(pots, u_rate, sigma):
    if not u_rate.size:
        return 0.0
    return contact_potential(pots.V_u, u_rate, sigma)


def _ri_u(pots, u_rate):
    return float(pots.ri_u(u_rate)) if u_rate.size else 0.0


def _ri_z(pots, z_rate):
    return float(pots.ri_z(z_rate)) if z_rate.size else 0.0


def _rescaled(V: ViscousPotential, e, tau, v):
    """tau/e psi(e v / tau) without overflow or underflow for extreme e / tau."""
    v = np.asarray(v, dtype=float)
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    if scale == 0.0:
        return 0.0
    if V.kind == "phom":
        # (1/p) (e/tau)^(p-1) |v|_W^p, evaluated in logs
        w = v / scale
        log_norm = math.log(scale) + 0.5 * math.log(float(w @ V.weight @ w))
        log_val = (V.p - 1.0) * (math.log(e) - math.log(tau)) + V.p * log_norm
        return math.exp(log_val) / V.p if log_val < 700.0 else math.inf
    val = float(eval_viscous(V, (v / tau) * e)) * (tau / e)
    return math.inf if math.isnan(val) else val


def joint_b(q: JointBQuery, pots: Potentials):
    """Rescaled joint B-function for eps > 0 and its Mosco limit at eps = 0."""
    u, z = q.u_rate, q.z_rate
    if q.eps > 0.0:
        if q.tau == 0.0:
            return math.inf
        eu, ez = q.eps ** q.alpha, q.eps
        val = q.tau / eu * q.sigma_u + q.tau / ez * q.sigma_z
        if u.size:
            val += _rescaled(pots.V_u, eu, q.tau, u)
        if z.size:
            val += float(eval_rate(pots.R, z)) + _rescaled(pots.V_z, ez, q.tau, z)
        return val
    if q.tau > 0.0:
        if q.sigma_u == 0.0 and q.sigma_z == 0.0:
            return _ri_u(pots, u) + _ri_z(pots, z)
        return math.inf
    if q.alpha == 1.0:
        return joint_contact(pots, u, z, q.sigma_u + q.sigma_z)
    if q.alpha > 1.0:
        if q.sigma_u == 0.0:
            return _ri_u(pots, u) + _psi_z_contact(pots, z, q.sigma_z)
        if not np.any(z):
            return _psi_u_contact(pots, u, q.sigma_u)
        return math.inf
    if q.sigma_z == 0.0:
        return _psi_u_contact(pots, u, q.sigma_u) + _ri_z(pots, z)
    if not np.any(u):
        return _psi_z_contact(pots, z, q.sigma_z)
    return math.inf


def mosco_recovery_tau(pots: Potentials, u_rate, z_rate, sigma, eps):
    """tau_eps = eps * min(lambda*, eps**-1/2) for the alpha = 1 limit at tau = 0,
    where lambda* attains the contact potential of psi_u (+) psi_z."""
    u_rate = np.atleast_1d(np.asarray(u_rate, dtype=float))
    z_rate = np.atleast_1d(np.asarray(z_rate, dtype=float))
    Vu, Vz = pots.V_u, pots.V_z
    if sigma == 0.0:
        lam = math.inf
    elif Vu.kind == "phom" and Vz.kind == "phom" and Vu.p == Vz.p:
        visc = float(eval_viscous(Vu, u_rate)) + float(eval_viscous(Vz, z_rate))
        lam = ((Vu.p - 1.0) * visc / sigma) ** (1.0 / Vu.p)
    else:
        lam = tau_infimum(lambda t: t * (float(eval_viscous(Vu, u_rate / t))
                                         + float(eval_viscous(Vz, z_rate / t))) + t * sigma)[1]
    return eps * min(lam, eps ** -0.5)


# --------------------------------------------------------------------------
# lower bounds


def lower_bound_check(q: JointBQuery, pots: Potentials, variant="split", rtol=1e-12):
    """Compare the joint B-function with its norm-based lower bound.

    For quadratic potentials psi(v) >= c/2 |v|^2 with c the smallest weight
    eigenvalue, so kappa(sigma) = sqrt(2 c sigma).  Variants:

    ``"split"``   |u'| kappa(sigma_u) + |z'| kappa(sigma_z)
    ``"alpha<1"`` |u'| kappa(sigma_u + sigma_z)
    ``"alpha=1"`` (|u'| + |z'|) kappa((sigma_u + sigma_z)/2)
    ``"alpha>=1"`` |z'| kappa(sigma_u + sigma_z)

    Returns ``(passed, lhs, rhs)``.
    """
    if not pots.quadratic:
        raise ValueError("lower bounds are implemented for quadratic viscous potentials")
    cands = [np.linalg.eigvalsh(pots.V_u.weight).min()] if pots.dim_u else []
    if pots.dim_z:
        cands.append(np.linalg.eigvalsh(pots.V_z.weight).min())
    c = min(cands)
    kappa = lambda s: math.sqrt(2.0 * c * s)
    nu = float(np.linalg.norm(q.u_rate))
    nz = float(np.linalg.norm(q.z_rate))
    su, sz = q.sigma_u, q.sigma_z
    if variant == "split":
        rhs = nu * kappa(su) + nz * kappa(sz)
    elif variant == "alpha<1":
        rhs = nu * kappa(su + sz)
    elif variant == "alpha=1":
        rhs = (nu + nz) * kappa(0.5 * (su + sz))
    elif variant == "alpha>=1":
        rhs = nz * kappa(su + sz)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    lhs = joint_b(q, pots)
    return bool(lhs >= rhs * (1.0 - rtol) - 1e-300), lhs, rhs

"""Dissipation potentials: the rate-independent part R, the viscous
potentials V_u / V_z, their conjugates and the proximal maps used by the
incremental scheme.

R is the weighted asymmetric l1 norm

    R(v) = sum_i kappa_plus[i] * max(v_i, 0) + kappa_minus[i] * max(-v_i, 0),

so that its subdifferential at the origin is the box
prod_i [-kappa_minus[i], kappa_plus[i]].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

__all__ = [
    "ConfigurationError",
    "RatePotential",
    "StableSet",
    "ViscousPotential",
    "Potentials",
    "eval_rate",
    "eval_viscous",
    "conj_viscous",
    "conj_w_z",
    "conj_w_z_grad",
    "conj_viscous_grad",
    "prox_z_step",
    "prox_quadratic_rate",
    "numeric_conjugate",
]


class ConfigurationError(ValueError):
    """Raised for ill-posed potential or energy data (non-SPD weights, ...)."""


def _vec(v, dim=None, name="v"):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if dim is not None and v.shape[-1] != dim:
        raise ValueError(f"{name} has dimension {v.shape[-1]}, expected {dim}")
    return v


def _check_spd(W, dim):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape != (dim, dim):
        raise ConfigurationError(f"weight matrix has shape {W.shape}, expected {(dim, dim)}")
    if not np.all(np.isfinite(W)):
        raise ConfigurationError("weight matrix must be finite")
    if not np.allclose(W, W.T, atol=1e-12):
        raise ConfigurationError("weight matrix is not symmetric")
    if dim and np.linalg.eigvalsh(W).min() <= 0.0:
        raise ConfigurationError("weight matrix is not positive definite")
    return W


# --------------------------------------------------------------------------
# rate-independent potential


@dataclass(frozen=True)
class StableSet:
    """The box  dR(0) = prod_i [lower_i, upper_i]."""

    lower: np.ndarray
    upper: np.ndarray

    def contains(self, sigma, tol=0.0):
        sigma = np.asarray(sigma, dtype=float)
        return bool(np.all(sigma >= self.lower - tol) and np.all(sigma <= self.upper + tol))

    def project(self, sigma):
        return np.clip(sigma, self.lower, self.upper)

    def distance(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        return np.linalg.norm(sigma - self.project(sigma), axis=-1)


@dataclass(frozen=True)
class RatePotential:
    kappa_plus: np.ndarray
    kappa_minus: np.ndarray

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kappa_plus, dtype=float))
        km = np.atleast_1d(np.asarray(self.kappa_minus, dtype=float))
        if kp.shape != km.shape or kp.ndim != 1:
            raise ConfigurationError("kappa_plus and kappa_minus must be 1-d and of equal length")
        if np.any(kp <= 0) or np.any(km <= 0):
            raise ConfigurationError("rate weights must be positive")
        if not (np.all(np.isfinite(kp)) and np.all(np.isfinite(km))):
            raise ConfigurationError("rate weights must be finite")
        object.__setattr__(self, "kappa_plus", kp)
        object.__setattr__(self, "kappa_minus", km)

    @classmethod
    def symmetric(cls, kappa, dim=1):
        k = np.broadcast_to(np.asarray(kappa, dtype=float), (dim,)).copy()
        return cls(k, k.copy())

    @property
    def dimension(self):
        return self.kappa_plus.shape[0]

    @property
    def stable_set(self):
        return StableSet(-self.kappa_minus, self.kappa_plus.copy())

    @property
    def c_lower(self):
        """c_R with R(v) >= c_R |v|_1."""
        if self.dimension == 0:
            return 1.0
        return float(np.minimum(self.kappa_plus, self.kappa_minus).min())

    @property
    def c_upper(self):
        """C_R with R(v) <= C_R |v|_2."""
        if self.dimension == 0:
            return 0.0
        return float(np.maximum(self.kappa_plus, self.kappa_minus).max() * np.sqrt(self.dimension))

    def __call__(self, v):
        return eval_rate(self, v)

    def subdifferential_residual(self, v, sigma, vtol=0.0):
        """Distance of ``sigma`` from dR(v); zero iff sigma is in dR(v).

        Components with |v_i| <= vtol are treated as zero.
        """
        v = _vec(v, self.dimension)
        sigma = _vec(sigma, self.dimension, "sigma")
        target = np.clip(sigma, -self.kappa_minus, self.kappa_plus)
        target = np.where(v > vtol, self.kappa_plus, target)
        target = np.where(v < -vtol, -self.kappa_minus, target)
        return float(np.max(np.abs(sigma - target), initial=0.0))


def eval_rate(P: RatePotential, v) -> float:
    v = _vec(v, P.dimension)
    return np.sum(P.kappa_plus * np.maximum(v, 0.0) + P.kappa_minus * np.maximum(-v, 0.0), axis=-1)


# --------------------------------------------------------------------------
# viscous potentials

# Example (C): phi(s) = s^2/2 for |s|<=1, (|s|+1)^2/4 - 1/2 beyond.
def _phi_c(s):
    a = np.abs(s)
    return np.where(a <= 1.0, 0.5 * s * s, 0.25 * (a + 1.0) ** 2 - 0.5)


def _phi_c_conj(r):
    a = np.abs(r)
    return np.where(a <= 1.0, 0.5 * r * r, r * r - a + 0.5)


def _phi_c_grad(s):
    a = np.abs(s)
    return np.where(a <= 1.0, s, 0.5 * np.sign(s) * (a + 1.0))


@dataclass(frozen=True)
class ViscousPotential:
    """Superlinear convex potential with psi(0) = 0.

    Use the constructors :meth:`quadratic`, :meth:`p_homogeneous`,
    :meth:`norm_based`, :meth:`custom_c`, :meth:`custom_d`.
    """

    kind: str
    dimension: int
    p: float = 2.0
    weight: Optional[np.ndarray] = None
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    profile_conj: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    profile_slope0: float = 0.0
    printed_conjugate: bool = True

    # constructors -------------------------------------------------------
    @classmethod
    def quadratic(cls, dim, weight=None):
        return cls.p_homogeneous(2.0, dim, weight)

    @classmethod
    def p_homogeneous(cls, p, dim, weight=None):
        if p <= 1.0:
            raise ConfigurationError("p-homogeneous potentials need p > 1")
        W = np.eye(dim) if weight is None else _check_spd(weight, dim)
        return cls("phom", int(dim), p=float(p), weight=W)

    @classmethod
    def norm_based(cls, profile, dim, profile_conj=None, slope0=0.0):
        """psi(v) = profile(|v|) for a convex nondecreasing superlinear profile."""
        return cls("norm", int(dim), profile=profile, profile_conj=profile_conj,
                   profile_slope0=float(slope0))

    @classmethod
    def custom_c(cls):
        return cls("custom_c", 2)

    @classmethod
    def custom_d(cls, printed_conjugate=True):
        return cls("custom_d", 2, printed_conjugate=printed_conjugate)

    # queries ------------------------------------------------------------
    @property
    def is_quadratic(self):
        return self.kind == "phom" and self.p == 2.0

    @property
    def weight_inv(self):
        return np.linalg.inv(self.weight)

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)

    def __call__(self, v):
        return eval_viscous(self, v)

    def conj(self, xi):
        return conj_viscous(self, xi)

    def grad(self, v):
        """Gradient of psi (all shipped potentials are C^1 away from the
        origin; norm-based ones need a differentiable profile)."""
        v = _vec(v, self.dimension)
        if self.kind == "phom":
            Wv = v @ self.weight
            if self.p == 2.0:
                return Wv
            r2 = np.sum(v * Wv, axis=-1, keepdims=True)
            safe = np.where(r2 > 0, r2, 1.0)
            return np.where(r2 > 0, safe ** (self.p / 2.0 - 1.0), 0.0) * Wv
        if self.kind == "custom_c":
            return np.stack([v[..., 0], _phi_c_grad(v[..., 1])], axis=-1)
        if self.kind == "custom_d":
            return np.stack([v[..., 0], v[..., 1] ** 3], axis=-1)
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        h = 1e-7 * np.maximum(r, 1.0)
        dz = (self.profile(r + h) - self.profile(np.maximum(r - h, 0.0))) / (r + h - np.maximum(r - h, 0.0))
        return np.where(r > 0, dz * v / np.where(r > 0, r, 1.0), 0.0)

    def ri_part(self, v):
        """Rate-independent part lim_{g->0+} psi(g v)/g (symbolic)."""
        v = _vec(v, self.dimension)
        if self.kind == "norm":
            return self.profile_slope0 * np.linalg.norm(v, axis=-1)
        return np.zeros(v.shape[:-1]) if v.ndim > 1 else 0.0

    def scaled(self, lam):
        """The rescaled potential v -> psi(lam v)/lam as a plain callable."""
        return lambda v: eval_viscous(self, lam * np.asarray(v, dtype=float)) / lam


def eval_viscous(V: ViscousPotential, v):
    v = _vec(v, V.dimension)
    if V.kind == "phom":
        r2 = np.einsum("...i,ij,...j->...", v, V.weight, v)
        return np.maximum(r2, 0.0) ** (V.p / 2.0) / V.p
    if V.kind == "norm":
        return V.profile(np.linalg.norm(v, axis=-1))
    if V.kind == "custom_c":
        return 0.5 * v[..., 0] ** 2 + _phi_c(v[..., 1])
    if V.kind == "custom_d":
        return 0.5 * v[..., 0] ** 2 + 0.25 * v[..., 1] ** 4
    raise ConfigurationError(f"unknown potential kind {V.kind!r}")


def conj_viscous(V: ViscousPotential, xi):
    xi = _vec(xi, V.dimension, "xi")
    if V.kind == "phom":
        r2 = np.einsum("...i,ij,...j->...", xi, V.weight_inv, xi)
        q = V.p_conj
        return np.maximum(r2, 0.0) ** (q / 2.0) / q
    if V.kind == "custom_c":
        return 0.5 * xi[..., 0] ** 2 + _phi_c_conj(xi[..., 1])
    if V.kind == "custom_d":
        c = 4.0 / 3.0 if V.printed_conjugate else 0.75
        return 0.5 * xi[..., 0] ** 2 + c * np.abs(xi[..., 1]) ** (4.0 / 3.0)
    if V.profile_conj is not None:
        return V.profile_conj(np.linalg.norm(xi, axis=-1))
    # psi*(xi) = zeta*(|xi|), zeta* by a 1-d concave maximisation
    r = np.linalg.norm(xi, axis=-1)
    return np.vectorize(lambda a: _scalar_conjugate(V.profile, a))(r)[()]


def _scalar_conjugate(zeta, r):
    """sup_{h >= 0} r h - zeta(h) by bracketing and bounded Brent."""
    if r <= 0.0:
        return 0.0
    hi = 1.0
    while r * hi - float(zeta(hi)) > r * (hi / 2) - float(zeta(hi / 2)) and hi < 1e12:
        hi *= 2.0
    res = optimize.minimize_scalar(lambda h: float(zeta(h)) - r * h, bounds=(0.0, hi),
                                   method="bounded", options={"xatol": 1e-13 * max(hi, 1.0)})
    return max(-res.fun, 0.0)


def numeric_conjugate(fun, xi, x0=None, grad=None):
    """Legendre-Fenchel conjugate sup_v <xi, v> - fun(v) by quasi-Newton
    ascent; ``fun`` must be convex and superlinear."""
    xi = np.asarray(xi, dtype=float)
    x0 = np.zeros_like(xi) if x0 is None else np.asarray(x0, dtype=float)
    obj = lambda v: float(fun(v)) - float(xi @ v)
    jac = None if grad is None else (lambda v: np.asarray(grad(v), dtype=float) - xi)
    res = optimize.minimize(obj, x0, jac=jac, method="BFGS", options={"gtol": 1e-12})
    return -res.fun, res.x


# --------------------------------------------------------------------------
# composite conjugate W*_z and the proximal step


def conj_w_z(V_z: ViscousPotential, P: RatePotential, zeta):
    """W*_z(zeta) = min over sigma in dR(0) of V_z*(zeta - sigma)."""
    zeta = _vec(zeta, P.dimension, "zeta")
    box = P.stable_set
    if V_z.is_quadratic:
        W = V_z.weight
        if np.allclose(W, np.diag(np.diag(W))):
            d = zeta - box.project(zeta)
            return 0.5 * np.sum(d * d / np.diag(W), axis=-1)
        if zeta.ndim > 1:
            return np.array([conj_w_z(V_z, P, z) for z in zeta])
        if box.contains(zeta):
            return 0.0
        # min 1/2 (zeta-s)^T W^{-1} (zeta-s) over the box: coordinate descent
        Winv = V_z.weight_inv
        sigma = _box_qp(Winv, Winv @ zeta, box.lower, box.upper, box.project(zeta))
        d = zeta - sigma
        return 0.5 * float(d @ Winv @ d)
    if zeta.ndim > 1:
        return np.array([conj_w_z(V_z, P, z) for z in zeta])
    if box.contains(zeta):
        return 0.0
    res = optimize.minimize(lambda s: float(conj_viscous(V_z, zeta - s)), box.project(zeta),
                            method="L-BFGS-B", bounds=list(zip(box.lower, box.upper)),
                            options={"ftol": 1e-15, "gtol": 1e-12})
    return float(res.fun)


def _box_qp(H, b, lo, hi, x0, tol=1e-15, max_sweeps=10000):
    """argmin 1/2 x^T H x - b^T x over lo <= x <= hi (H SPD)."""
    x = np.array(x0, dtype=float)
    diag = np.diag(H)
    for _ in range(max_sweeps):
        delta = 0.0
        for i in range(x.size):
            r = b[i] - H[i] @ x + diag[i] * x[i]
            xi = min(max(r / diag[i], lo[i]), hi[i])
            delta = max(delta, abs(xi - x[i]))
            x[i] = xi
        if delta <= tol * (1.0 + np.abs(x).max()):
            break
    return x


def prox_quadratic_rate(H, b, center, P: RatePotential, x0=None, tol=1e-14, max_sweeps=100000):
    """argmin_x  1/2 x^T H x - b^T x + R(x - center)  for SPD ``H``.

    Cyclic coordinate descent with the exact one-dimensional shifted
    soft-threshold; one sweep is exact when ``H`` is diagonal.

    Returns ``(x, sweeps)``.
    """
    H = np.atleast_2d(H)
    b = np.asarray(b, dtype=float)
    c = np.asarray(center, dtype=float)
    x = c.copy() if x0 is None else np.array(x0, dtype=float)
    n = x.size
    if n == 0:
        return x, 0
    kp, km = P.kappa_plus, P.kappa_minus
    diag = np.diag(H).copy()
    if np.count_nonzero(H - np.diag(diag)) == 0:
        g = diag * c - b
        d = np.where(g < -kp, -(g + kp) / diag, np.where(g > km, -(g - km) / diag, 0.0))
        return c + d, 1
    scale = 1.0 + np.abs(c).max()
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for i in range(n):
            r = b[i] - H[i] @ x + diag[i] * x[i]
            g = diag[i] * c[i] - r
            if g < -kp[i]:
                d = -(g + kp[i]) / diag[i]
            elif g > km[i]:
                d = -(g - km[i]) / diag[i]
            else:
                d = 0.0
            xi = c[i] + d
            delta = max(delta, abs(xi - x[i]))
            x[i] = xi
        if delta <= tol * scale:
            return x, sweep
    return x, max_sweeps


def prox_z_step(P: RatePotential, V_z: ViscousPotential, z_prev, zeta_drive, tau, eps):
    """Minimiser over z of

        tau R((z - z_prev)/tau) + eps/(2 tau) |z - z_prev|_W^2 + <zeta_drive, z>

    i.e. one viscous-plastic step at a frozen driving force.
    """
    if tau <= 0 or eps <= 0:
        raise ValueError("tau and eps must be positive")
    z_prev = _vec(z_prev, P.dimension, "z_prev")
    zeta_drive = _vec(zeta_drive, P.dimension, "zeta_drive")
    if V_z.is_quadratic:
        H = (eps / tau) * V_z.weight
        return prox_quadratic_rate(H, H @ z_prev - zeta_drive, z_prev, P)[0]

    def obj(z):
        d = z - z_prev
        return float(eval_rate(P, d) + tau / eps * eval_viscous(V_z, eps * d / tau) + zeta_drive @ z)

    if V_z.kind in ("custom_c", "custom_d"):
        # separable: exact 1-d convex minimisation per component
        z = z_prev.copy()
        for i in range(P.dimension):
            def f1(x, i=i):
                zz = z.copy()
                zz[i] = x
                return obj(zz)
            span = 1.0 + abs(zeta_drive[i]) * tau / eps * 10.0
            res = optimize.minimize_scalar(f1, bracket=(z_prev[i] - span, z_prev[i] + span))
            z[i] = res.x if f1(res.x) < f1(z_prev[i]) else z_prev[i]
        return z
    res = optimize.minimize(obj, z_prev, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
    return res.x


# --------------------------------------------------------------------------
# bundle


@dataclass(frozen=True)
class Potentials:
    """The dissipation triple (V_u, R, V_z); psi_z is R + V_z."""

    V_u: ViscousPotential
    R: RatePotential
    V_z: ViscousPotential

    def __post_init__(self):
        if self.V_z.dimension != self.R.dimension:
            raise ConfigurationError("V_z and R act on spaces of different dimension")

    @property
    def dim_u(self):
        return self.V_u.dimension

    @property
    def dim_z(self):
        return self.R.dimension

    def psi_z(self, v):
        return eval_rate(self.R, v) + eval_viscous(self.V_z, v)

    def ri_u(self, v):
        return self.V_u.ri_part(v)

    def ri_z(self, v):
        return eval_rate(self.R, v) + self.V_z.ri_part(v)

    @property
    def quadratic(self):
        return self.V_u.is_quadratic and self.V_z.is_quadratic


def conj_viscous_grad(V: ViscousPotential, xi):
    """Gradient of V* (p-homogeneous potentials), row-wise for batches."""
    if V.kind != "phom":
        raise NotImplementedError("closed-form conjugate gradient needs a p-homogeneous potential")
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    Wx = xi @ V.weight_inv
    r2 = np.sum(xi * Wx, axis=1, keepdims=True)
    q = V.p_conj
    if q == 2.0:
        return Wx
    return np.where(r2 > 0, np.maximum(r2, 1e-300) ** (q / 2.0 - 1.0), 0.0) * Wx


def conj_w_z_grad(V_z: ViscousPotential, P: RatePotential, zeta):
    """Gradient of W*_z at rows of ``zeta``: the conjugate gradient at
    zeta - sigma* with sigma* the minimising point of the box."""
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    box = P.stable_set
    if V_z.is_quadratic and np.allclose(V_z.weight, np.diag(np.diag(V_z.weight))):
        sig = box.project(zeta)
    elif V_z.is_quadratic:
        Wi = V_z.weight_inv
        sig = np.array([_box_qp(Wi, Wi @ z, box.lower, box.upper, box.project(z)) for z in zeta])
    else:
        raise NotImplementedError("W*_z gradient implemented for quadratic V_z")
    return conj_viscous_grad(V_z, zeta - sig)

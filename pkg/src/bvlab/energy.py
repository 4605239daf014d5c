"""Driving energies E(t, u, z), their partial gradients, the power dE/dt and
the generalized slopes.

States are passed as separate ``u`` and ``z`` arrays; either block may have
dimension zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .potentials import ConfigurationError, Potentials, conj_viscous, conj_w_z

__all__ = [
    "Load",
    "QuadraticEnergy",
    "SmoothEnergy",
    "Slopes",
    "eval_energy",
    "grads",
    "slopes",
]

_T_SLACK = 1e-9


class Load:
    """A time curve t -> R^k with an exact derivative.

    Built from samples (cubic spline), from a callable pair, or as zero.
    """

    def __init__(self, value: Callable, derivative: Callable, dim: int, samples=None):
        self._value = value
        self._derivative = derivative
        self.dim = int(dim)
        self.samples = samples

    @classmethod
    def zero(cls, dim):
        z = lambda t: np.zeros(np.shape(t) + (dim,))
        return cls(z, z, dim, samples=None)

    @classmethod
    def from_samples(cls, times, values):
        """``values`` has one row per sample time.  Fewer than 4 samples fall
        back to the natural spline of that order (linear for two)."""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or times.size < 2 or values.shape[0] != times.size:
            raise ConfigurationError("load samples need >= 2 rows of [t, value...]")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("load sample times must be strictly increasing")
        if times.size == 2:
            slope = (values[1] - values[0]) / (times[1] - times[0])
            val = lambda t: values[0] + (np.asarray(t)[..., None] - times[0]) * slope
            der = lambda t: np.broadcast_to(slope, np.shape(t) + slope.shape).copy()
        else:
            spl = CubicSpline(times, values, axis=0, bc_type="natural")
            dspl = spl.derivative()
            val, der = spl, dspl
        return cls(val, der, values.shape[1], samples=(times, values))

    @classmethod
    def from_callable(cls, value, derivative, dim):
        return cls(value, derivative, dim)

    def __call__(self, t):
        return np.asarray(self._value(t), dtype=float)

    def derivative(self, t):
        return np.asarray(self._derivative(t), dtype=float)


def _check_time(t, T):
    if t < -_T_SLACK or t > T + _T_SLACK:
        raise ValueError(f"time {t} outside [0, {T}]")


@dataclass
class QuadraticEnergy:
    """E(t,u,z) = 1/2<Au,u> + <Bu,z> + 1/2<Gz,z> - <f(t),u> - <g(t),z> + offset.

    ``B`` maps u-space to the dual of z-space (shape ``(dim_z, dim_u)``).  The
    constant ``offset`` makes the sampled minimum at least one; it never
    enters gradients or the power.
    """

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    f: Load
    g: Load
    T: float
    offset: Optional[float] = None
    descriptor: str = "quadratic"

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float)) if np.size(self.A) else np.zeros((0, 0))
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float)) if np.size(self.G) else np.zeros((0, 0))
        n, m = self.A.shape[0], self.G.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(m, n)
        if self.A.shape != (n, n) or self.G.shape != (m, m):
            raise ConfigurationError("A and G must be square")
        if not (np.allclose(self.A, self.A.T) and np.allclose(self.G, self.G.T)):
            raise ConfigurationError("A and G must be symmetric")
        if self.f.dim != n or self.g.dim != m:
            raise ConfigurationError("load dimensions do not match A and G")
        K = self.hessian()
        if K.size and np.linalg.eigvalsh(K).min() < -1e-10:
            raise ConfigurationError("block operator [[A, B^T], [B, G]] is not positive semidefinite")
        if self.offset is None:
            self.offset = 0.0
            low = self._sampled_minimum()
            self.offset = max(0.0, 1.0 - low)

    @property
    def dim_u(self):
        return self.A.shape[0]

    @property
    def dim_z(self):
        return self.G.shape[0]

    def hessian(self, t=None, u=None, z=None):
        return np.block([[self.A, self.B.T], [self.B, self.G]])

    def _sampled_minimum(self, n_t=41):
        K = self.hessian()
        ts = np.linspace(0.0, self.T, n_t)
        lows = []
        for t in ts:
            rhs = np.concatenate([self.f(t), self.g(t)])
            # minimiser of the quadratic (least-squares for singular K)
            q = np.linalg.lstsq(K, rhs, rcond=None)[0] if K.size else rhs
            n = self.dim_u
            lows.append(self.value(t, q[:n], q[n:]))
        return float(min(lows))

    def value(self, t, u, z):
        _check_time(t, self.T)
        u = np.asarray(u, dtype=float)
        z = np.asarray(z, dtype=float)
        return (0.5 * u @ self.A @ u + z @ self.B @ u + 0.5 * z @ self.G @ z
                - self.f(t) @ u - self.g(t) @ z + self.offset)

    # gradients broadcast over leading batch axes of u and z
    def grad_u(self, t, u, z):
        return np.asarray(u) @ self.A.T + np.asarray(z) @ self.B - self.f(t)

    def grad_z(self, t, u, z):
        return np.asarray(u) @ self.B.T + np.asarray(z) @ self.G.T - self.g(t)

    def power(self, t, u, z):
        _check_time(t, self.T)
        return float(-self.f.derivative(t) @ u - self.g.derivative(t) @ z)


@dataclass
class SmoothEnergy:
    """Energy given by callbacks ``value(t,u,z)``, ``grad_u``, ``grad_z``,
    ``power`` and optionally ``hess(t,u,z)`` (full (n+m) square matrix).
    Without ``hess`` a central-difference Hessian of the gradients is used."""

    dim_u: int
    dim_z: int
    T: float
    value_fn: Callable
    grad_u_fn: Callable
    grad_z_fn: Callable
    power_fn: Callable
    hess_fn: Optional[Callable] = None
    descriptor: str = "smooth"
    offset: float = 0.0
    extra: dict = field(default_factory=dict)

    def value(self, t, u, z):
        _check_time(t, self.T)
        return float(self.value_fn(t, np.asarray(u, float), np.asarray(z, float))) + self.offset

    def grad_u(self, t, u, z):
        return np.asarray(self.grad_u_fn(t, np.asarray(u, float), np.asarray(z, float)), dtype=float)

    def grad_z(self, t, u, z):
        return np.asarray(self.grad_z_fn(t, np.asarray(u, float), np.asarray(z, float)), dtype=float)

    def power(self, t, u, z):
        _check_time(t, self.T)
        return float(self.power_fn(t, np.asarray(u, float), np.asarray(z, float)))

    def hessian(self, t, u, z):
        if self.hess_fn is not None:
            return np.asarray(self.hess_fn(t, u, z), dtype=float)
        n, m = self.dim_u, self.dim_z
        q = np.concatenate([u, z]).astype(float)
        H = np.empty((n + m, n + m))
        for j in range(n + m):
            h = 1e-6 * max(1.0, abs(q[j]))
            qp, qm = q.copy(), q.copy()
            qp[j] += h
            qm[j] -= h
            gp = np.concatenate([self.grad_u(t, qp[:n], qp[n:]), self.grad_z(t, qp[:n], qp[n:])])
            gm = np.concatenate([self.grad_u(t, qm[:n], qm[n:]), self.grad_z(t, qm[:n], qm[n:])])
            H[:, j] = (gp - gm) / (2 * h)
        return 0.5 * (H + H.T)


def eval_energy(E, t, u, z):
    return E.value(t, u, z)


def grads(E, t, u, z):
    """(mu_full, zeta_full) = (D_u E, D_z E) at (t, u, z)."""
    return E.grad_u(t, u, z), E.grad_z(t, u, z)


@dataclass(frozen=True)
class Slopes:
    s_u: float
    s_z: float
    mu: np.ndarray
    zeta: np.ndarray


def slopes(E, pots: Potentials, t, u, z) -> Slopes:
    """s_u = V_u*(-D_u E), s_z = W_z*(-D_z E)."""
    mu, zeta = grads(E, t, u, z)
    s_u = float(conj_viscous(pots.V_u, -mu)) if mu.size else 0.0
    s_z = float(conj_w_z(pots.V_z, pots.R, -zeta)) if zeta.size else 0.0
    return Slopes(s_u, s_z, mu, zeta)

"""Bundled example systems.

Each builder returns an :class:`Instance` holding the energy, the potentials
and an initial state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .energy import Load, QuadraticEnergy, SmoothEnergy
from .potentials import Potentials, RatePotential, ViscousPotential

__all__ = [
    "Instance",
    "prototype_2dof",
    "elastoplastic_1d",
    "ode45_example",
    "ode45_exact",
    "double_well_jump",
    "BUILTINS",
    "build",
]


@dataclass
class Instance:
    name: str
    energy: object
    pots: Potentials
    u0: np.ndarray
    z0: np.ndarray
    T: float


def _quadratic_pots(n, m, kappa=1.0):
    return Potentials(ViscousPotential.quadratic(n), RatePotential.symmetric(kappa, m),
                      ViscousPotential.quadratic(m))


def prototype_2dof(T=1.0, kappa=1.0, load_scale=1.0):
    """Uniformly convex coupled system with u in R^2, z in R^1 and linear ramp
    loads; the initial state is the equilibrium at t = 0 (z locally stable)."""
    A = np.array([[2.0, 0.5], [0.5, 1.5]])
    B = np.array([[0.3, -0.2]])
    G = np.array([[1.0]])
    f = Load.from_samples([0.0, T], load_scale * np.array([[0.0, 0.0], [2.0, 1.0]]))
    g = Load.from_samples([0.0, T], load_scale * np.array([[0.0], [1.5]]))
    E = QuadraticEnergy(A, B, G, f, g, T, descriptor="prototype_2dof")
    return Instance("Prototype2dof", E, _quadratic_pots(2, 1, kappa), np.zeros(2), np.zeros(1), T)


def elastoplastic_1d(T=1.0, kappa=0.5, f_max=2.0):
    """Scalar linearised elastoplasticity: E = 1/2 (u - z)^2 + 1/2 z^2 - f(t) u
    with a ramp load f(t) = f_max t / T."""
    A = np.array([[1.0]])
    B = np.array([[-1.0]])
    G = np.array([[2.0]])
    f = Load.from_samples([0.0, T], [[0.0], [f_max]])
    g = Load.zero(1)
    E = QuadraticEnergy(A, B, G, f, g, T, descriptor="elastoplastic_1d")
    return Instance("Elastoplastic1d", E, _quadratic_pots(1, 1, kappa), np.zeros(1), np.zeros(1), T)


def ode45_exact(lam, omega, a, eps_u):
    """Complex amplitude c of the periodic solution U(t) = Re/Im of c e^{i w t}
    and the constant speed |U'|."""
    c = a / (lam + 1j * omega * eps_u)
    return c, abs(c) * omega


def ode45_example(lam=1.0, omega=1.0, a=1.0, T=2 * np.pi):
    """eps^alpha u' + D phi(u) = a (cos wt, sin wt) with
    phi(u) = lam/2 |u|^2 + 1/2 max(|u| - 1, 0)^2 and no z-component.

    The forcing enters as the load f(t) of E(t, u) = phi(u) - <f(t), u>.
    ``u0`` is left at zero; use :func:`ode45_initial` for the periodic orbit.
    """
    def f(t):
        t = np.asarray(t, dtype=float)
        return a * np.stack([np.cos(omega * t), np.sin(omega * t)], axis=-1)

    def df(t):
        t = np.asarray(t, dtype=float)
        return a * omega * np.stack([-np.sin(omega * t), np.cos(omega * t)], axis=-1)

    def value(t, u, z):
        r = np.linalg.norm(u)
        return 0.5 * lam * r * r + 0.5 * max(r - 1.0, 0.0) ** 2 - f(t) @ u

    def grad_u(t, u, z):
        r = np.linalg.norm(u, axis=-1, keepdims=True)
        out = np.maximum(r - 1.0, 0.0) / np.where(r > 0, r, 1.0)
        return lam * u + out * u - f(t)

    def grad_z(t, u, z):
        return np.zeros(np.shape(u)[:-1] + (0,))

    def power(t, u, z):
        return -df(t) @ u

    def hess(t, u, z):
        r = np.linalg.norm(u)
        H = lam * np.eye(2)
        if r > 1.0:
            e = u / r
            H = H + (1.0 - 1.0 / r) * np.eye(2) + np.outer(e, e) / r
        return H

    E = SmoothEnergy(2, 0, T, value, grad_u, grad_z, power, hess, descriptor="ode45",
                     extra={"lam": lam, "omega": omega, "a": a})
    # phi >= 0 and |<f, u>| <= a |u|: shift so the energy stays >= 1 on |u| <= 2
    E.offset = 1.0 + 2.0 * a
    pots = Potentials(ViscousPotential.quadratic(2), RatePotential(np.zeros(0), np.zeros(0)),
                      ViscousPotential.quadratic(0))
    return Instance("Ode45Example", E, pots, np.zeros(2), np.zeros(0), T)


def ode45_initial(inst: Instance, eps_u):
    """Initial value on the exact periodic orbit."""
    x = inst.energy.extra
    c, _ = ode45_exact(x["lam"], x["omega"], x["a"], eps_u)
    return np.array([c.real, c.imag])


def double_well_jump(T=1.0, k=0.5, h=0.5, kappa=0.3, f0=-0.5, f1=1.0):
    """Quartic double well in u coupled to a plastic variable z:

        E = 1/4 (u^2 - 1)^2 - f(t) u + k/2 (z - u)^2 + h/2 z^2,

    with f ramping from f0 to f1.  u leaves the left well at a fold and
    jumps to the right well; the coupling makes z slip during the jump.
    """
    f = Load.from_samples([0.0, T], [[f0], [f1]])

    def value(t, u, z):
        return 0.25 * (u[0] ** 2 - 1.0) ** 2 - f(t)[0] * u[0] + 0.5 * k * (z[0] - u[0]) ** 2 + 0.5 * h * z[0] ** 2

    def grad_u(t, u, z):
        u, z = np.asarray(u), np.asarray(z)
        return u ** 3 - u - f(t) + k * (u - z)

    def grad_z(t, u, z):
        u, z = np.asarray(u), np.asarray(z)
        return k * (z - u) + h * z

    def power(t, u, z):
        return -f.derivative(t)[0] * u[0]

    def hess(t, u, z):
        return np.array([[3.0 * u[0] ** 2 - 1.0 + k, -k], [-k, k + h]])

    E = SmoothEnergy(1, 1, T, value, grad_u, grad_z, power, hess, descriptor="double_well",
                     extra={"k": k, "h": h, "kappa": kappa})
    # the well depth bounds the energy from below by -|f| |u| - 1/4 - ...; a shift of 2 keeps it >= 1
    E.offset = 2.0
    # left-well equilibrium at t = 0 with z unloaded (zero driving force)
    zc = k / (k + h)
    u0 = optimize.brentq(lambda x: x ** 3 - x - f0 + k * (x - zc * x), -3.0, -0.6)
    pots = _quadratic_pots(1, 1, kappa)
    return Instance("DoubleWellJump", E, pots, np.array([u0]), np.array([zc * u0]), T)


BUILTINS = {
    "Prototype2dof": prototype_2dof,
    "Elastoplastic1d": elastoplastic_1d,
    "Ode45Example": ode45_example,
    "DoubleWellJump": double_well_jump,
}


def build(name, **params):
    try:
        return BUILTINS[name](**params)
    except KeyError:
        raise KeyError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None

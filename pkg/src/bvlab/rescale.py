"""Energy-dissipation arclength and the reparametrised curves s -> (t(s), q(s)).

The arclength of a viscous trajectory is

    s(t) = int_0^t 1 + [dissipation rate] + |u'(r)| dr,

where the dissipation rate is the sum of the five ledger terms.  In the
parameter s the normalisation  t' + M_eps(t, q, t', q') + |u'| = 1  holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .contact import JointBQuery, joint_b
from .energy import slopes
from .potentials import Potentials
from .viscous import Trajectory

__all__ = ["ParamCurve", "arclength", "reparametrize"]


@dataclass
class ParamCurve:
    s: np.ndarray
    t: np.ndarray
    u: np.ndarray
    z: np.ndarray
    dt: np.ndarray
    du: np.ndarray
    dz: np.ndarray
    slope_u: np.ndarray
    slope_z: np.ndarray
    norm_residual: np.ndarray
    eps: float
    alpha: float
    mu: Optional[np.ndarray] = None
    zeta: Optional[np.ndarray] = None
    labels: list = field(default_factory=list)

    @property
    def length(self):
        return float(self.s[-1])

    @property
    def n_nodes(self):
        return self.s.size

    def columns(self):
        n, m = self.u.shape[1], self.z.shape[1]
        return (["s", "t"] + [f"u_{i}" for i in range(n)] + [f"z_{i}" for i in range(m)] + ["dt"]
                + [f"du_{i}" for i in range(n)] + [f"dz_{i}" for i in range(m)]
                + ["slope_u", "slope_z", "norm_residual"])

    def table(self):
        return np.column_stack([self.s, self.t, self.u, self.z, self.dt, self.du, self.dz,
                                self.slope_u, self.slope_z, self.norm_residual])


def arclength(traj: Trajectory, E=None, pots: Potentials = None, cfg=None):
    """Cumulative arclength at the trajectory nodes (s_0 = 0).

    The ledger holds the per-step rates of the piecewise-linear interpolant,
    so the step integrals are exact.
    """
    tau = traj.cfg.tau
    du = np.diff(traj.u, axis=0)
    speed_u = np.linalg.norm(du, axis=1) / tau if du.shape[1] else np.zeros(traj.n_steps)
    rate = 1.0 + traj.ledger[1:].sum(axis=1) + speed_u
    return np.concatenate([[0.0], np.cumsum(tau * rate)])


def reparametrize(traj: Trajectory, s_of_t, n_nodes: int, E=None, pots: Potentials = None) -> ParamCurve:
    """Resample the trajectory on a uniform grid in s.

    Monotone cubic (PCHIP) interpolation of t and q against s; derivatives by
    second-order central differences.  When ``E`` and ``pots`` are supplied
    the slopes and the normalisation residual are evaluated per node.
    """
    s_of_t = np.asarray(s_of_t, dtype=float)
    if np.any(np.diff(s_of_t) <= 0):
        raise RuntimeError("arclength must be strictly increasing")
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    S = s_of_t[-1]
    s = np.linspace(0.0, S, n_nodes)
    n, m = traj.u.shape[1], traj.z.shape[1]
    t = PchipInterpolator(s_of_t, traj.t)(s)
    t = np.clip(np.maximum.accumulate(t), 0.0, traj.t[-1])
    q = PchipInterpolator(s_of_t, np.column_stack([traj.u, traj.z]), axis=0)(s)
    h = s[1] - s[0]
    dt = np.gradient(t, h)
    dq = np.gradient(q, h, axis=0)
    u, z = q[:, :n], q[:, n:]
    du, dz = dq[:, :n], dq[:, n:]
    su = np.full(n_nodes, np.nan)
    sz = np.full(n_nodes, np.nan)
    res = np.full(n_nodes, np.nan)
    mu = zeta = None
    cfg = traj.cfg
    if E is not None and pots is not None:
        mu, zeta = np.empty((n_nodes, n)), np.empty((n_nodes, m))
        for k in range(n_nodes):
            sl = slopes(E, pots, t[k], u[k], z[k])
            su[k], sz[k], mu[k], zeta[k] = sl.s_u, sl.s_z, sl.mu, sl.zeta
            if dt[k] > 0:
                M = joint_b(JointBQuery(dt[k], du[k], dz[k], sl.s_u, sl.s_z, cfg.alpha, cfg.eps), pots)
            else:
                M = np.inf
            res[k] = dt[k] + M + (np.linalg.norm(du[k]) if n else 0.0) - 1.0
    return ParamCurve(s, t, u, z, dt, du, dz, su, sz, res, cfg.eps, cfg.alpha, mu, zeta)

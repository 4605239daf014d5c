"""Experiment configuration and the solve -> reparametrise -> analyse pipeline.

A configuration is a YAML mapping::

    energy:
      builtin: Prototype2dof      # or explicit A, B, G, f, g
      params: {}
    potentials:                   # optional for builtins
      V_u: {p: 2, weight: [[1, 0], [0, 1]]}
      V_z: {p: 2}
      R: {kappa_plus: [1.0], kappa_minus: [1.0]}
    initial: {u: [0, 0], z: [0]}  # optional for builtins
    alpha: 1.0
    eps: [0.1, 0.01]
    tau_ratio: 0.05               # tau = ratio * min(eps^alpha, eps); or tau: 1e-4
    T: 1.0
    n_nodes: 2000
    jump_nodes: 64
    output: out
    seed: 0
    tolerances: {tol_t: 0.05}
"""
from __future__ import annotations

import copy
import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import builtins as bi
from .bv import (
    ClassifyTolerances,
    bv_candidate,
    check_bv,
    classify_curve,
    compute_jump_costs,
    detect_jumps,
)
from .energy import Load, QuadraticEnergy
from .potentials import ConfigurationError, Potentials, RatePotential, ViscousPotential
from .rescale import arclength, reparametrize
from .viscous import SolverConfig, Trajectory, apriori_stats, ed_balance_residual, solve_viscous

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "run_experiment", "analyze_artifacts",
           "emit_plotdata", "WORKERS_ENV"]

WORKERS_ENV = "BVLAB_WORKERS"
FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """Schema violation; the message starts with the offending key path."""


@dataclass
class ExperimentConfig:
    energy: dict
    alpha: float
    eps: list
    T: float
    output: str
    potentials: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    tau: float = None
    tau_ratio: float = None
    n_nodes: int = 2000
    jump_nodes: int = 64
    seed: int = 0
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>: expected a mapping")
        known = set(cls.__dataclass_fields__)
        for k in d:
            if k not in known:
                raise ConfigError(f"{k}: unknown key")
        for k in ("energy", "alpha", "eps", "T", "output"):
            if k not in d:
                raise ConfigError(f"{k}: missing required key")
        cfg = cls(**copy.deepcopy(d))
        cfg.validate()
        return cfg

    def to_dict(self):
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}

    def validate(self):
        if not isinstance(self.energy, dict):
            raise ConfigError("energy: expected a mapping")
        if "builtin" in self.energy:
            if self.energy["builtin"] not in bi.BUILTINS:
                raise ConfigError(f"energy.builtin: unknown builtin {self.energy['builtin']!r}")
        else:
            for k in ("A", "B", "G"):
                if k not in self.energy:
                    raise ConfigError(f"energy.{k}: missing (no builtin given)")
            for k in ("potentials", "initial"):
                if not getattr(self, k):
                    raise ConfigError(f"{k}: required for explicit energies")
        try:
            self.alpha = float(self.alpha)
            self.T = float(self.T)
        except (TypeError, ValueError):
            raise ConfigError("alpha/T: expected numbers") from None
        if self.alpha <= 0:
            raise ConfigError("alpha: must be positive")
        if self.T <= 0:
            raise ConfigError("T: must be positive")
        if not isinstance(self.eps, list) or not self.eps:
            raise ConfigError("eps: expected a non-empty list")
        try:
            self.eps = [float(e) for e in self.eps]
        except (TypeError, ValueError):
            raise ConfigError("eps: entries must be numbers") from None
        if any(not (0 < e <= 1) for e in self.eps):
            raise ConfigError("eps: entries must lie in (0, 1]")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps: list must be strictly decreasing")
        if (self.tau is None) == (self.tau_ratio is None):
            raise ConfigError("tau: give exactly one of tau, tau_ratio")
        if self.tau is not None and float(self.tau) <= 0:
            raise ConfigError("tau: must be positive")
        if self.tau_ratio is not None and float(self.tau_ratio) <= 0:
            raise ConfigError("tau_ratio: must be positive")
        known_tol = set(ClassifyTolerances.__dataclass_fields__)
        for k in self.tolerances:
            if k not in known_tol:
                raise ConfigError(f"tolerances.{k}: unknown tolerance")
        if int(self.n_nodes) < 3 or int(self.jump_nodes) < 3:
            raise ConfigError("n_nodes/jump_nodes: need at least 3")

    def step(self, eps):
        """Time step for one eps, snapped so that T is a whole number of steps."""
        raw = float(self.tau) if self.tau is not None else float(self.tau_ratio) * min(eps ** self.alpha, eps)
        n = max(1, int(math.ceil(self.T / raw - 1e-9)))
        return self.T / n


def load_config(path):
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"<file>: invalid YAML: {exc}") from None
    return ExperimentConfig.from_dict(d)


# --------------------------------------------------------------------------
# instance construction


def _viscous_from_entry(entry, dim, key):
    entry = entry or {}
    try:
        p = float(entry.get("p", 2.0))
        W = entry.get("weight")
        return ViscousPotential.p_homogeneous(p, dim, None if W is None else np.asarray(W, float))
    except ConfigurationError as exc:
        raise ConfigError(f"potentials.{key}: {exc}") from None


def _potentials_from_entry(entry, n, m):
    Vu = _viscous_from_entry(entry.get("V_u"), n, "V_u")
    Vz = _viscous_from_entry(entry.get("V_z"), m, "V_z")
    R = entry.get("R", {})
    try:
        kp = np.asarray(R.get("kappa_plus", R.get("kappa", [1.0] * m)), float).reshape(-1)
        km = np.asarray(R.get("kappa_minus", R.get("kappa", [1.0] * m)), float).reshape(-1)
        if kp.size == 1 and m > 1:
            kp = np.full(m, kp[0])
        if km.size == 1 and m > 1:
            km = np.full(m, km[0])
        return Potentials(Vu, RatePotential(kp, km), Vz)
    except ConfigurationError as exc:
        raise ConfigError(f"potentials.R: {exc}") from None


def _load_from_rows(rows, dim, key):
    if rows is None:
        return Load.zero(dim)
    a = np.asarray(rows, float)
    if a.ndim != 2 or a.shape[1] != dim + 1:
        raise ConfigError(f"energy.{key}: expected rows [t, value x {dim}]")
    try:
        return Load.from_samples(a[:, 0], a[:, 1:])
    except ConfigurationError as exc:
        raise ConfigError(f"energy.{key}: {exc}") from None


def build_instance(cfg: ExperimentConfig, eps):
    """The instance for one eps (the blow-up ODE depends on eps)."""
    e = cfg.energy
    if "builtin" in e:
        name = e["builtin"]
        params = dict(e.get("params", {}) or {})
        blowup = bool(params.pop("blowup", False))
        if name == "Ode45Example" and blowup:
            eu = eps ** cfg.alpha
            params.update(lam=0.0, omega=eu ** -0.5, a=eu ** 0.5)
        try:
            inst = bi.build(name, T=cfg.T, **params)
        except TypeError as exc:
            raise ConfigError(f"energy.params: {exc}") from None
        if name == "Ode45Example":
            inst.u0 = bi.ode45_initial(inst, eps ** cfg.alpha)
        pots = inst.pots
        if cfg.potentials:
            pots = _potentials_from_entry(cfg.potentials, pots.dim_u, pots.dim_z)
        u0, z0 = inst.u0, inst.z0
    else:
        A = np.atleast_2d(np.asarray(e["A"], float))
        G = np.atleast_2d(np.asarray(e["G"], float))
        n, m = A.shape[0], G.shape[0]
        try:
            E = QuadraticEnergy(A, np.asarray(e["B"], float), G, _load_from_rows(e.get("f"), n, "f"),
                                _load_from_rows(e.get("g"), m, "g"), cfg.T)
        except (ConfigurationError, ValueError) as exc:
            raise ConfigError(f"energy: {exc}") from None
        pots = _potentials_from_entry(cfg.potentials, n, m)
        inst = bi.Instance("explicit", E, pots, None, None, cfg.T)
        u0, z0 = None, None
    if cfg.initial:
        u0 = np.asarray(cfg.initial.get("u", u0), float)
        z0 = np.asarray(cfg.initial.get("z", z0), float)
    if u0 is None or z0 is None:
        raise ConfigError("initial: u and z required")
    if u0.size != pots.dim_u or z0.size != pots.dim_z:
        raise ConfigError("initial: dimensions do not match the energy")
    inst.pots, inst.u0, inst.z0 = pots, u0.reshape(pots.dim_u), z0.reshape(pots.dim_z)
    return inst


# --------------------------------------------------------------------------
# CSV helpers


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, str) else FLOAT_FMT % x for x in r])


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _numeric(rows):
    return np.array([[float(x) for x in r] for r in rows]) if rows else np.zeros((0, 0))


def _eps_dir(k):
    return f"eps_{k:02d}"


def _save_trajectory(path, traj: Trajectory):
    write_csv(path, traj.columns(), traj.table())


def _load_trajectory(path, cfg: SolverConfig, n, m):
    header, rows = read_csv(path)
    a = _numeric(rows)
    t = a[:, 0]
    i = 1
    u = a[:, i:i + n]; i += n
    z = a[:, i:i + m]; i += m
    mu = a[:, i:i + n]; i += n
    zeta = a[:, i:i + m]; i += m
    ledger = a[:, i:i + 5]
    return Trajectory(t, u, z, mu, zeta, np.zeros_like(z), ledger, cfg)


# --------------------------------------------------------------------------
# pipeline


def _solve_one(args):
    cfg_dict, k, eps = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    inst = build_instance(cfg, eps)
    scfg = SolverConfig(eps, cfg.alpha, cfg.step(eps), cfg.T)
    traj = solve_viscous(scfg, inst.energy, inst.pots, inst.u0, inst.z0)
    d = Path(cfg.output) / _eps_dir(k)
    d.mkdir(parents=True, exist_ok=True)
    _save_trajectory(d / "trajectory.csv", traj)
    return k


def run_experiment(config_path, output=None, workers=None):
    """Solve every eps of the configuration and analyse the results.

    Returns the artifact directory.  Raises :class:`ConfigError` or the
    solver's errors; trajectories finished before a failure stay on disk.
    """
    cfg = load_config(config_path)
    if output is not None:
        cfg.output = str(output)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    build_instance(cfg, cfg.eps[0])  # surface config errors before solving
    with open(out / "config.yaml", "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    jobs = [(cfg.to_dict(), k, e) for k, e in enumerate(cfg.eps)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            list(ex.map(_solve_one, jobs))
    else:
        for j in jobs:
            _solve_one(j)
    analyze_artifacts(out)
    return out


def _tolerances(cfg: ExperimentConfig, S):
    tol = dict(cfg.tolerances)
    tol.setdefault("tol_t", 1e-3 / S)
    return ClassifyTolerances(**tol)


def analyze_artifacts(artifact_dir):
    """Rebuild curves from stored trajectories and write the analysis files."""
    out = Path(artifact_dir)
    cfg_path = out / "config.yaml"
    if not cfg_path.exists():
        raise FileNotFoundError(f"missing {cfg_path}")
    cfg = load_config(cfg_path)
    summary = []
    last = None
    for k, eps in enumerate(cfg.eps):
        d = out / _eps_dir(k)
        inst = build_instance(cfg, eps)
        E, pots = inst.energy, inst.pots
        scfg = SolverConfig(eps, cfg.alpha, cfg.step(eps), cfg.T)
        tpath = d / "trajectory.csv"
        if not tpath.exists():
            raise FileNotFoundError(f"missing {tpath}")
        traj = _load_trajectory(tpath, scfg, pots.dim_u, pots.dim_z)
        s = arclength(traj)
        curve = reparametrize(traj, s, int(cfg.n_nodes), E, pots)
        write_csv(d / "paramcurve.csv", curve.columns(), curve.table())
        tol = _tolerances(cfg, curve.length)
        labels = classify_curve(curve, pots, tol)
        write_csv(d / "regimes.csv", ["s", "label", "lambda_u", "lambda_z", "residual"],
                  [(sk, lb.label, lb.lambda_u, lb.lambda_z, lb.residual) for sk, lb in zip(curve.s, labels)])
        _, cum = ed_balance_residual(traj, E)
        st = apriori_stats(traj, E, pots)
        plateaus = detect_jumps(curve, tol.tol_t)
        summary.append((eps, scfg.tau, curve.length, st.u_L1, st.z_L1,
                        st.R_var if not math.isnan(st.R_var) else 0.0, float(cum[-1]),
                        float(len(plateaus)), float(np.nanmax(np.abs(curve.norm_residual[1:-1])))))
        last = (curve, plateaus, E, pots)
    write_csv(out / "summary.csv", ["eps", "tau", "S_eps", "u_L1", "z_L1", "R_var", "ed_residual",
                                    "n_jumps", "norm_residual_max"], summary)
    curve, plateaus, E, pots = last
    cand = bv_candidate(curve, plateaus)
    compute_jump_costs(cfg.alpha, cand, E, pots, int(cfg.jump_nodes))
    report = check_bv(cfg.alpha, cand, E, pots)
    rows = []
    for i, j in enumerate(cand.jumps):
        items = [("t_star", j.t_star), ("cost", j.cost), ("energy_drop", j.energy_drop),
                 ("gap", j.energy_drop - j.cost), ("converged", float(j.curve_left.converged))]
        for name, vec in (("u_minus", j.u_minus), ("z_minus", j.z_minus), ("u_plus", j.u_plus), ("z_plus", j.z_plus)):
            items += [(f"{name}_{a}", x) for a, x in enumerate(vec)]
        rows += [(str(i), key, float(val)) for key, val in items]
        c = j.curve_left
        n, m = c.u.shape[1], c.z.shape[1]
        write_csv(out / f"jump_{i:02d}.csv", ["r"] + [f"u_{a}" for a in range(n)] + [f"z_{a}" for a in range(m)],
                  np.column_stack([np.linspace(0, 1, c.u.shape[0]), c.u, c.z]))
    write_csv(out / "jumps.csv", ["jump", "key", "value"], rows)
    bv_rows = [("eps", cfg.eps[-1]), ("stationarity_max", report.stationarity_max),
               ("stability_max", report.stability_max), ("balance_residual", report.balance_residual),
               ("variation", report.variation), ("n_jumps", float(len(report.jump_gaps)))]
    bv_rows += [(f"jump_gap_{i}", g) for i, g in enumerate(report.jump_gaps)]
    write_csv(out / "bv_check.csv", ["key", "value"], [(k, float(v)) for k, v in bv_rows])
    return out


LABEL_CODES = {"EuRz": 0, "EuVz": 1, "VuRz": 2, "Vuz": 3, "VuBz": 4, "BuVz": 5, "BuBz": 6, "Bz": 7, "Bu": 8,
               "Unclassified": -1}


def emit_plotdata(artifact_dir):
    """Long-format ``series, x, y`` files under ``<artifact_dir>/plotdata``.

    Returns the list of missing inputs (empty on success).
    """
    out = Path(artifact_dir)
    cfg_path = out / "config.yaml"
    if not cfg_path.exists():
        return [str(cfg_path)]
    cfg = load_config(cfg_path)
    needed = []
    for k in range(len(cfg.eps)):
        for name in ("trajectory.csv", "paramcurve.csv", "regimes.csv"):
            p = out / _eps_dir(k) / name
            if not p.exists():
                needed.append(str(p))
    if needed:
        return needed
    pd = out / "plotdata"
    pd.mkdir(exist_ok=True)
    rows_u, rows_z, rows_st, rows_rg = [], [], [], []
    for k, eps in enumerate(cfg.eps):
        tag = f"eps={eps:.6g}"
        header, rows = read_csv(out / _eps_dir(k) / "trajectory.csv")
        a = _numeric(rows)
        for j, name in enumerate(header):
            if name.startswith("u_"):
                rows_u += [(f"{tag}:{name}", x, y) for x, y in zip(a[:, 0], a[:, j])]
            elif name.startswith("z_"):
                rows_z += [(f"{tag}:{name}", x, y) for x, y in zip(a[:, 0], a[:, j])]
        header, rows = read_csv(out / _eps_dir(k) / "paramcurve.csv")
        a = _numeric(rows)
        rows_st += [(tag, x, y) for x, y in zip(a[:, 0], a[:, 1])]
        _, rows = read_csv(out / _eps_dir(k) / "regimes.csv")
        rows_rg += [(tag, float(r[0]), float(LABEL_CODES.get(r[1], -1))) for r in rows]
    for name, rows in (("t_u.csv", rows_u), ("t_z.csv", rows_z), ("s_t.csv", rows_st), ("regimes.csv", rows_rg)):
        write_csv(pd / name, ["series", "x", "y"], rows)
    return []

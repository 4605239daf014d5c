"""Regime timelines: label each node of the rescaled curve by which
switching conditions it satisfies, for the three time-scale orderings.
At finite eps many nodes are still visibly viscous, so their conditions
conflict and they stay Unclassified; labelled nodes always fall in the
table allowed for their alpha.

    python demos/05_regimes.py      (about 20 s)
"""
import math
from collections import Counter

from bvlab import (
    ClassifyTolerances,
    SolverConfig,
    arclength,
    builtins,
    classify_curve,
    reparametrize,
    solve_viscous,
)
from bvlab.bv import allowed_labels

eps = 0.05
for name in ("Prototype2dof", "Elastoplastic1d", "DoubleWellJump"):
    inst = builtins.build(name)
    for alpha in (0.5, 1.0, 2.0):
        tau = inst.T / math.ceil(inst.T / (0.1 * min(eps ** alpha, eps)))
        traj = solve_viscous(SolverConfig(eps, alpha, tau, inst.T), inst.energy, inst.pots, inst.u0, inst.z0)
        curve = reparametrize(traj, arclength(traj), 600, inst.energy, inst.pots)
        counts = Counter(lab.label for lab in classify_curve(curve, inst.pots, ClassifyTolerances(tol_t=0.05)))
        shown = ", ".join(f"{k} {v}" for k, v in sorted(counts.items()))
        print(f"{name:>16} alpha={alpha:3}: allowed {'/'.join(allowed_labels(alpha))}; {shown}")

"""Energy-dissipation balance of the time-discrete viscous solution on the
two-degree-of-freedom prototype.  The cumulative residual is non-positive
and first order in the step size.

    python demos/03_energy_balance.py
"""
from bvlab import SolverConfig, apriori_stats, builtins, ed_balance_residual, solve_viscous

inst = builtins.prototype_2dof()
prev = None
print(f"{'tau':>10} {'residual':>12} {'ratio':>7} {'max signed':>11}")
for tau in (1e-3, 5e-4, 2.5e-4, 1.25e-4):
    traj = solve_viscous(SolverConfig(0.1, 1.0, tau, 1.0), inst.energy, inst.pots, inst.u0, inst.z0)
    _, cum = ed_balance_residual(traj, inst.energy)
    ratio = f"{prev / cum[-1]:7.3f}" if prev is not None else " " * 7
    print(f"{tau:10.2e} {cum[-1]:12.4e} {ratio} {cum.max():11.2e}")
    prev = cum[-1]

stats = apriori_stats(traj, inst.energy, inst.pots)
print(f"\n|u'|_L1 = {stats.u_L1:.4f} (a priori bound {stats.bound_u_L1:.4f}), "
      f"R-variation = {stats.R_var:.4f}, sup E = {stats.sup_E:.4f}")

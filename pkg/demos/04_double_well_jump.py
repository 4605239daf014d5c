"""A viscous jump in the double-well instance: arclength reparametrization,
jump detection, the Finsler transition cost against the energy drop, the
total variation against the integral of M along the rescaled curve, and the
BV-solution audit.

    python demos/04_double_well_jump.py      (about 30 s)
"""
import numpy as np

from bvlab import (
    SolverConfig,
    arclength,
    builtins,
    bv_candidate,
    check_bv,
    compute_jump_costs,
    detect_jumps,
    reparametrize,
    solve_viscous,
    total_variation,
)

eps, alpha = 1e-3, 1.0
inst = builtins.double_well_jump()
E, pots = inst.energy, inst.pots
traj = solve_viscous(SolverConfig(eps, alpha, eps / 20, inst.T), E, pots, inst.u0, inst.z0)
curve = reparametrize(traj, arclength(traj), 4000, E, pots)
print(f"eps = {eps:g}: {traj.n_steps} steps, arclength S = {curve.length:.4f}")

plateaus = detect_jumps(curve, tol_t=0.05)
cand = bv_candidate(curve, plateaus)
compute_jump_costs(alpha, cand, E, pots, n_nodes=64)
for j in cand.jumps:
    print(f"jump at t* = {j.t_star:.4f}: u {j.u_minus[0]:+.4f} -> {j.u_plus[0]:+.4f}, "
          f"z {j.z_minus[0]:+.4f} -> {j.z_plus[0]:+.4f}")
    print(f"  transition cost {j.cost:.6f}, energy drop {j.energy_drop:.6f}")

# M along the rescaled curve equals 1 - t' + residual - |u'|; its integral
# is the dissipation the viscous solution spends in s.
M = 1.0 + curve.norm_residual - curve.dt - np.linalg.norm(curve.du, axis=1)
print(f"total variation {total_variation(alpha, cand, pots):.5f}, "
      f"integral of M {np.trapezoid(M, curve.s):.5f}")

report = check_bv(alpha, cand, E, pots)
print(f"BV audit: stationarity {report.stationarity_max:.2e}, stability {report.stability_max:.2e}, "
      f"balance {report.balance_residual:+.4f}, jump gaps {[f'{g:+.1e}' for g in report.jump_gaps]}")

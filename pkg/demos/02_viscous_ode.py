"""Viscous solver against the exact periodic solution of
eps u' + lam u = a (cos wt, sin wt), and the blow-up of |u'|_L1 when
lam = 0, w = eps^(-1/2), a = eps^(1/2).

    python demos/02_viscous_ode.py
"""
import numpy as np

from bvlab import SolverConfig, apriori_stats, builtins, solve_viscous

T = 2 * np.pi
inst = builtins.ode45_example(lam=1.0, omega=1.0, a=1.0, T=T)
print("periodic orbit, (lam, w, a) = (1, 1, 1)")
for eps in (1.0, 0.5, 0.1):
    tau = T / 6000
    traj = solve_viscous(SolverConfig(eps, 1.0, tau, T), inst.energy, inst.pots,
                         builtins.ode45_initial(inst, eps), inst.z0)
    _, speed = builtins.ode45_exact(1.0, 1.0, 1.0, eps)
    print(f"  eps = {eps:4}: |u'|_L1 = {apriori_stats(traj).u_L1:.5f}, exact {speed * T:.5f}")

print("\nblow-up configuration on [0, 1]")
for eps in (1e-1, 1e-2, 1e-3):
    b = builtins.ode45_example(lam=0.0, omega=eps ** -0.5, a=eps ** 0.5, T=1.0)
    traj = solve_viscous(SolverConfig(eps, 1.0, eps / 10, 1.0), b.energy, b.pots,
                         builtins.ode45_initial(b, eps), b.z0)
    print(f"  eps = {eps:g}: |u'|_L1 = {apriori_stats(traj).u_L1:.3f}  (eps^-1/2 = {eps ** -0.5:.3f})")

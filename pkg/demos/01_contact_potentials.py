"""Contact potentials: closed forms, the numeric tau-infimum, and the joint
B-function with its eps -> 0 limit.

    python demos/01_contact_potentials.py
"""
import numpy as np

from bvlab import (
    JointBQuery,
    Potentials,
    RatePotential,
    ViscousPotential,
    contact_potential,
    joint_b,
    mosco_recovery_tau,
)

v = np.array([1.0, 1.0])

print("contact potential b(v, sigma) at v = (1, 1)")
print(f"{'potential':>22} {'sigma':>6} {'closed form':>14} {'tau-infimum':>14}")
cases = {
    "quadratic diag(1, 4)": ViscousPotential.quadratic(2, np.diag([1.0, 4.0])),
    "|v|^3 / 3": ViscousPotential.p_homogeneous(3.0, 2),
    "quartic (custom D)": ViscousPotential.custom_d(),
}
for name, V in cases.items():
    for sigma in (0.5, 2.0):
        closed = contact_potential(V, v, sigma)
        numeric = contact_potential(V, v, sigma, method="numeric")
        print(f"{name:>22} {sigma:6.2f} {closed:14.10f} {numeric:14.10f}")

# The joint B-function at eps > 0 converges to its limit along the
# recovery sequence tau_eps = eps * min(lambda*, eps^(-1/2)).
pots = Potentials(ViscousPotential.quadratic(2), RatePotential.symmetric(1.0, 1), ViscousPotential.quadratic(1))
u_rate, z_rate = np.array([0.8, -0.3]), np.array([1.1])
for s_u, s_z in ((0.3, 0.2), (0.0, 0.0)):
    limit = joint_b(JointBQuery(0.0, u_rate, z_rate, s_u, s_z, 1.0, 0.0), pots)
    print(f"\nslopes ({s_u}, {s_z}): limit B = {limit:.10f}")
    for k in range(2, 7):
        eps = 10.0 ** -k
        tau = mosco_recovery_tau(pots, u_rate, z_rate, s_u + s_z, eps)
        val = joint_b(JointBQuery(tau, u_rate, z_rate, s_u, s_z, 1.0, eps), pots)
        print(f"  eps = 1e-{k}: B = {val:.10f}   error {abs(val - limit):.2e}")

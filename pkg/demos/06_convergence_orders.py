"""Measure each scheme's convergence order by step halving.

Global occupation error against the exact state at beta = 1 on a 6-site
ring, halving the step three times.  The observed order is the log2 ratio of
successive errors: first order for the plain congruence step, second for the
corrected one, fourth for Runge-Kutta.
"""

import numpy as np

from fermicool import (
    GrandCanonical,
    HamiltonianModel,
    SolverConfig,
    build_huckel,
    cool,
    default_chemical_potential,
    exact_grand_fd,
    occupation_spectrum,
)

system = build_huckel(6, alpha=0.0, gamma=1.0)
mu = default_chemical_potential(system)
model = HamiltonianModel(system)
exact = occupation_spectrum(exact_grand_fd(system, mu, 1.0), system.s)

dbetas = [0.1, 0.05, 0.025, 0.0125]
for scheme in ("kraus1", "kraus2", "rk4"):
    errors = []
    for db in dbetas:
        config = SolverConfig(scheme, beta_final=1.0, delta_beta=db, record_every=10**6)
        traj = cool(model, GrandCanonical(mu), config)
        errors.append(np.abs(occupation_spectrum(traj.final_density, system.s) - exact).max())
    print(f"\n{scheme}")
    print("  dbeta      global error   observed order")
    prev = None
    for db, err in zip(dbetas, errors):
        order = "" if prev is None else f"{np.log2(prev / err):14.3f}"
        print(f"  {db:<9g}  {err:.6e}{order}")
        prev = err

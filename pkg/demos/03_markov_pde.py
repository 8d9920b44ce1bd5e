"""
Claims on a diffusion: the backward equation
============================================

For f = F(y(T)) the martingale kernel is H_x(y, t) beta(y, t) where H solves
the backward heat-type equation with terminal data F.  The finite-difference
solution is compared with closed forms and with plain Monte Carlo.
"""

import numpy as np

from replicator import ClaimSpec, DiffusionSpec, HSolverSpec, PayoffSpec, solve_H
from replicator.claims import claim_mean, mc_terminal_expectation
from replicator.pde import analytic_H

diff = DiffusionSpec(y0=0.5)
for kind in ("square", "cosine"):
    sol = solve_H(PayoffSpec(kind), diff, 1.0, n_x=801, n_t=400)
    H, _ = analytic_H(PayoffSpec(kind), diff, 1.0, "physical")
    X, T = np.meshgrid(sol.x, sol.t)
    win = (sol.x >= sol.window[0]) & (sol.x <= sol.window[1])
    print(f"{kind:7s} max error on the 6-sd window: {np.max(np.abs(sol.H - H(X, T))[:, win]):.2e}")

# an OU driver has no closed form for cos, so check H(y0, 0) by simulation
ou = DiffusionSpec(y0=0.5, kappa=-0.4)
claim = ClaimSpec.markov(PayoffSpec("cosine"), ou, 1.0, HSolverSpec(mode="finite-difference"))
mean, se = mc_terminal_expectation(claim, samples=100_000, seed=1)
print(f"H(y0, 0) = {claim_mean(claim)[0]:.5f}, Monte Carlo {mean[0]:.5f} +- {se[0]:.5f}")

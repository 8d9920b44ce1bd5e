"""
Replicating w(1) and w(1)^2
===========================

dx = u dt with x(0) = 0 must end exactly at f.  The optimal control is
driven by a martingale multiplier; its cost has a closed form that a Monte
Carlo run should reproduce.
"""

from replicator import ClaimSpec, ControlLaw, GMatrix, SystemSpec, WeightSpec, build_grid, monte_carlo, mu_bar
from replicator.pde import DiffusionSpec, PayoffSpec

sys = SystemSpec([[0.0]], [[1.0]], [0.0], 1.0)
w = WeightSpec("pure-power", 0.75, 1.0)
g = GMatrix([[1.0]])

claims = {
    "f = w(1)": ClaimSpec.linear([[1.0]], 1.0),
    "f = w(1)^2": ClaimSpec.markov(PayoffSpec("square"), DiffusionSpec(), 1.0),
}

# closed forms: 1/3 and 85/84
for label, claim in claims.items():
    law = ControlLaw(sys, w, g, claim)
    rep = monte_carlo(law, build_grid(1.0, 1024), 5000, seed=0)
    print(f"{label:12s} mu_bar {mu_bar(law)[0]:+.3f}  cost {rep.mean_cost:.4f} +- {rep.se_cost:.4f}"
          f"  closed form {rep.closed_form_cost:.6f}  mean gap^2 {rep.mean_gap_sq:.2e}")

# refining the grid: for w(1)^2 the gap halves with N
law = ControlLaw(sys, w, g, claims["f = w(1)^2"])
for N in (256, 512, 1024, 2048):
    rep = monte_carlo(law, build_grid(1.0, N), 5000, seed=0)
    print(f"N={N:5d}  mean gap^2 {rep.mean_gap_sq:.3e}")

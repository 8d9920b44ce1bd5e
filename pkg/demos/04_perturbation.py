"""
Is the control really optimal?
==============================

Add Gamma^-1 b' exp(A'(T-t)) h(t) to the optimal control with a
deterministic h chosen so the terminal state is unchanged.  The extra cost
should be int h'Qh dt, always positive, with a zero-mean cross term.
"""

from replicator import balanced_two_piece, build_grid, perturbation_test
from replicator import experiments as ex

law = ex.build_law(ex.preset("scalar-w"))
grid = build_grid(1.0, 1024)
h = balanced_two_piece(law)
print("h on [0, 1/2):", h.values[0], " h on [1/2, 1]:", h.values[1])

for scale in (0.5, 1.0, 2.0):
    out = perturbation_test(law, grid, h.scaled(scale), 5000, seed=0)
    print(f"scale {scale}: increase {out['cost_increase']:.5f} +- {out['se_increase']:.5f}"
          f"  expected {out['expected_increase']:.5f}"
          f"  gap^2 {out['gap_sq_opt']:.2e} -> {out['gap_sq_perturbed']:.2e}")

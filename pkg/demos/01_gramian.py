"""
The weighted Gramian and its inverse
====================================

R(s) collects how much of the state can still be reached from time s.
With a weight that vanishes at the horizon, R(s) goes to zero like
(T - s)^(1 - alpha) and its inverse blows up, but slowly enough that the
square of the inverse stays integrable.
"""

import numpy as np

from replicator import GMatrix, SystemSpec, WeightSpec, build_gramian, lemma1_diagnostic

# scalar benchmark: A = 0, b = G = 1, g = (1 - t)^0.75
sys1 = SystemSpec([[0.0]], [[1.0]], [0.0], 1.0)
w = WeightSpec("pure-power", 0.75, 1.0)
table = build_gramian(sys1, w, GMatrix([[1.0]]))
for s in (0.0, 0.5, 0.9, 0.999):
    print(f"R({s}) = {table.R(s)[0, 0]:.10f}   4(1-s)^0.25 = {4 * (1 - s) ** 0.25:.10f}")

# the double integrator: the off-diagonal entry only builds up away from T
sys2 = SystemSpec([[0.0, 1.0], [0.0, 0.0]], np.eye(2), [0.0, 0.0], 1.0)
table2 = build_gramian(sys2, w, GMatrix(np.eye(2)))
print("R(0) for the double integrator:\n", np.round(table2.R(0.0), 6))

# growth of |R^-1| near T: slope -(1 - alpha) on a log-log scale
t = np.linspace(0.9, 0.999, 50)
norms = np.linalg.norm(table2.R_inv(t), axis=(1, 2))
print("log-log slope of |R^-1|:", np.polyfit(np.log(1 - t), np.log(norms), 1)[0])

# integrability of |R^-1|^2 on [tau, T]
print(lemma1_diagnostic(table, 0.5))

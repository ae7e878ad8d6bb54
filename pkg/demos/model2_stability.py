"""Amplification of the one-step map on the two-field model problem.

The map always keeps one eigenvalue at 1; the table shows the modulus of
the other one. Weak Jacobi becomes unstable for positive alpha once the
step is large; strong Gauss-Seidel stays bounded for every alpha and step.
"""

import numpy as np

from mpimex import builtin_tableau, densela
from mpimex.problems.model2 import model2_system
from mpimex.stability import non_unit_eigenvalue, probe_update_matrix

tab = builtin_tableau("imex1")
dts = np.logspace(-2, 4, 7)

for kind in ("weak-jacobi", "weak-gs", "strong-gs"):
    print(kind)
    for alpha in (-0.5, 0.0, 0.5, 1.5):
        C = [probe_update_matrix(model2_system(-1.0, -1.0, alpha), tab, kind, dt) for dt in dts]
        rhos = [abs(non_unit_eigenvalue(densela.eigenvalues(c))) for c in C]
        print(f"  alpha={alpha:5.1f}  " + " ".join(f"{r:7.3f}" for r in rhos))
print("dt:", " ".join(f"{dt:g}" for dt in dts))

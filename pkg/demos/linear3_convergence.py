"""Observed orders on the three-field linear ODE, per predictor.

The stage-variant predictor extrapolates the coupling from earlier stages
of the same step and loses one order; the four state-based predictors keep
the design order of the tableau.
"""

from mpimex.cli import convergence_rows
from mpimex.problems import build_problem

prob = build_problem("linear3")
dts = [0.2, 0.1, 0.05, 0.025, 0.0125]

print(f"{'scheme':8s}{'predictor':16s}" + "".join(f"{dt:>10g}" for dt in dts[1:]))
for scheme in ("imex2", "imex3", "imex4"):
    for kind in ("weak-jacobi", "strong-gs", "stage-variant"):
        rows = convergence_rows(prob, scheme, kind, dts)
        slopes = "".join(f"{r['observed_slope']:10.2f}" for r in rows[1:])
        print(f"{scheme:8s}{kind:16s}{slopes}")

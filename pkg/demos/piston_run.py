"""Piston released from a compressed position in a gas-filled tube.

Prints the piston displacement and the gas mass over one time unit. The
mass should stay constant under the moving mesh.
"""

from mpimex import builtin_tableau
from mpimex.integrator import integrate
from mpimex.problems import build_problem

prob = build_problem("piston", cells=64)
obs = []
traj = integrate(prob.system, builtin_tableau("imex3"), "strong-gs", prob.u0, 0.0, 1.0, 0.01,
                 callback=lambda n, t, u: n % 10 == 0 and obs.append((t, prob.observe(u))))

print(f"{'t':>6s}" + "".join(f"{k:>22s}" for k in obs[0][1]))
for t, o in obs:
    print(f"{t:6.2f}" + "".join(f"{v:22.12f}" for v in o.values()))

"""Two-field linear model problem for the stability analysis.

    u1' = lambda1 (u1 + u2),   u2' = lambda2 (u1 + u2)

partitioned with a free parameter ``alpha`` as

    r1 = (1 - alpha) lambda1 u1 + lambda1 c1,   c1 = alpha u1 + u2
    r2 = (1 - alpha) lambda2 u2 + lambda2 c2,   c2 = u1 + alpha u2

The monolithic velocity does not depend on ``alpha``; partitioned schemes do.
"""

import math

import numpy as np

from ..errors import ContractViolation
from ..system import FULL, CoupledOdeSystem, Subsystem
from .base import Problem, merge_params

DEFAULTS = {"lambda1": -1.0, "lambda2": -1.0, "alpha": 0.5, "u0": (1.0, 0.0), "t_final": 1.0}


def model2_system(lambda1=-1.0, lambda2=-1.0, alpha=0.5) -> CoupledOdeSystem:
    lam = (float(lambda1), float(lambda2))
    alpha = float(alpha)

    def sub(k):
        lk = lam[k]
        return Subsystem(
            name=f"u{k + 1}", dim=1, cdim=1,
            velocity=lambda u, c, t: (1.0 - alpha) * lk * u + lk * c,
            jac_u=lambda u, c, t: np.array([[(1.0 - alpha) * lk]]),
            jac_c=lambda u, c, t: np.array([[lk]]),
        )

    def coupling(i, parts, t):
        u1, u2 = parts[0][0], parts[1][0]
        return np.array([alpha * u1 + u2 if i == 0 else u1 + alpha * u2])

    def jac_coupling(i, j, parts, t):
        return np.array([[alpha if i == j else 1.0]])

    return CoupledOdeSystem(subsystems=[sub(0), sub(1)], coupling=coupling, jac_coupling=jac_coupling,
                            structure=FULL, name="model2")


def model2_exact(t, u0, lambda1, lambda2):
    """Closed form: A = [[l1, l1], [l2, l2]] has A^2 = (l1 + l2) A."""
    u0 = np.asarray(u0, dtype=float)
    A = np.array([[lambda1, lambda1], [lambda2, lambda2]])
    s = lambda1 + lambda2
    growth = t if s == 0 else math.expm1(s * t) / s
    return u0 + growth * (A @ u0)


def build(**overrides) -> Problem:
    p = merge_params(DEFAULTS, overrides, "model2")
    if not (p["lambda1"] < 0 and p["lambda2"] < 0):
        raise ContractViolation("model2 needs lambda1, lambda2 < 0")
    u0 = np.asarray(p["u0"], dtype=float)
    lam1, lam2 = float(p["lambda1"]), float(p["lambda2"])
    return Problem(name="model2", system=model2_system(lam1, lam2, p["alpha"]), u0=u0,
                   t_final=float(p["t_final"]), blocks={"ode": [0, 1]},
                   exact=lambda t: model2_exact(t, u0, lam1, lam2), linear=True, params=p,
                   observables=lambda u: {"u1": u[0], "u2": u[1]})

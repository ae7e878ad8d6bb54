"""Three scalar subsystems coupled through a constant matrix.

    u' = A u,   A = [[1, 1, 1], [1, 1, 0], [1, 1, 1]],   u(0) = (1, 0, 2)

split as ``r_i = u_i + c_i`` with ``c_1 = u_2 + u_3``, ``c_2 = u_1`` and
``c_3 = u_1 + u_2``.
"""

import numpy as np
import scipy.sparse

from .. import densela
from ..system import FULL, CoupledOdeSystem, Subsystem
from .base import Problem, merge_params

MATRIX = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 1.0, 1.0]])
U0 = np.array([1.0, 0.0, 2.0])
DEPENDS = np.array([[False, True, True], [True, False, False], [True, True, False]])

DEFAULTS = {"t_final": 2.0}


def _coupling(i, parts, t):
    u1, u2, u3 = (p[0] for p in parts)
    return np.array([(u2 + u3, u1, u1 + u2)[i]])


def _jac_coupling(i, j, parts, t):
    return scipy.sparse.csr_matrix([[1.0 if DEPENDS[i, j] else 0.0]])


def _scalar(name):
    one = np.ones((1, 1))
    return Subsystem(
        name=name, dim=1, cdim=1,
        velocity=lambda u, c, t: u + c,
        jac_u=lambda u, c, t: one,
        jac_c=lambda u, c, t: one,
    )


def linear3_system() -> CoupledOdeSystem:
    # The flag stays "full": c_1 reaches forward to u_2 and u_3. Couplings 2
    # and 3 are nevertheless triangular, which strong_gs_exactness_check sees.
    return CoupledOdeSystem(
        subsystems=[_scalar("u1"), _scalar("u2"), _scalar("u3")],
        coupling=_coupling, jac_coupling=_jac_coupling, depends=DEPENDS,
        structure=FULL, name="linear3",
    )


def linear3_exact(t, u0=U0):
    """``P exp(t Sigma) P^-1 u0`` from the eigendecomposition of the matrix."""
    if t < 0:
        raise ValueError("t must be non-negative")
    w, P = densela.eig(MATRIX)
    # eigenvalues are 0 and (3 +- sqrt 5)/2, all real
    w, P = w.real, P.real
    coeff = densela.lu_solve(P, np.asarray(u0, dtype=float))
    return P @ (np.exp(w * t) * coeff)


def build(**overrides) -> Problem:
    p = merge_params(DEFAULTS, overrides, "linear3")
    return Problem(name="linear3", system=linear3_system(), u0=U0.copy(), t_final=float(p["t_final"]),
                   blocks={"ode": [0, 1, 2]}, exact=linear3_exact, linear=True, params=p,
                   observables=lambda u: {"u1": u[0], "u2": u[1], "u3": u[2]})

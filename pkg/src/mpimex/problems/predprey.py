"""Two-species advection-diffusion-reaction (predator-prey) on a square.

Cell-centred finite differences on ``n x n`` cells of ``[-0.5, 0.5]^2``:
central differences for diffusion, first-order upwind for advection and
homogeneous Neumann boundaries through mirrored ghost cells. The reaction
source enters each species only through its coupling term

    f1 = u1 (-(u1 - a1)(u1 - 1) - a2 u2)
    f2 = u2 (-a3 - a4 u2 + a2 u1)

Fields are flattened row-major with ``x`` varying fastest.
"""

import numpy as np
import scipy.sparse

from ..errors import ContractViolation
from ..system import FULL, CoupledOdeSystem, Subsystem
from .base import Problem, merge_params

DEFAULTS = {
    "n": 20,
    "diffusivity": 0.01,
    "velocity_prey": (0.0, 0.0),
    "velocity_predator": (0.5, 0.5),
    "a1": 0.25, "a2": 2.0, "a3": 1.0, "a4": 3.4,
    "center": (-0.25, -0.25),
    "radius": 0.2,
    "t_final": 1.0,
}


def _second_difference(n, h):
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0  # ghost equals the boundary cell
    off = np.ones(n - 1)
    return scipy.sparse.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def _upwind(n, h, speed):
    """Matrix of ``-speed * du/dx`` with zero-gradient ghosts."""
    if speed > 0:
        B = scipy.sparse.diags([np.ones(n), -np.ones(n - 1)], [0, -1], format="lil")
        B[0, 0] = 0.0
    elif speed < 0:
        B = scipy.sparse.diags([-np.ones(n), np.ones(n - 1)], [0, 1], format="lil")
        B[n - 1, n - 1] = 0.0
    else:
        return scipy.sparse.csr_matrix((n, n))
    return (-speed / h) * B.tocsr()


def transport_operator(n, diffusivity, velocity):
    """Sparse ``D Laplacian - v . grad`` on the flattened grid."""
    h = 1.0 / n
    eye = scipy.sparse.identity(n, format="csr")
    lap = scipy.sparse.kron(eye, _second_difference(n, h)) + scipy.sparse.kron(_second_difference(n, h), eye)
    vx, vy = (float(v) for v in velocity)
    adv = scipy.sparse.kron(eye, _upwind(n, h, vx)) + scipy.sparse.kron(_upwind(n, h, vy), eye)
    return (diffusivity * lap + adv).tocsr()


def reaction(u1, u2, a):
    a1, a2, a3, a4 = a
    return u1 * (-(u1 - a1) * (u1 - 1.0) - a2 * u2), u2 * (-a3 - a4 * u2 + a2 * u1)


def reaction_jacobian(u1, u2, a):
    """Pointwise partials ``((df1/du1, df1/du2), (df2/du1, df2/du2))``."""
    a1, a2, a3, a4 = a
    d11 = -(u1 - a1) * (u1 - 1.0) - a2 * u2 - u1 * (2.0 * u1 - a1 - 1.0)
    d12 = -a2 * u1
    d21 = a2 * u2
    d22 = -a3 - 2.0 * a4 * u2 + a2 * u1
    return (d11, d12), (d21, d22)


def cell_centres(n):
    x = -0.5 + (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x)  # X varies along axis 1, matching the flattening
    return X.ravel(), Y.ravel()


def initial_state(n, center, radius):
    X, Y = cell_centres(n)
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    d2 = radius * radius
    u2 = np.zeros_like(X)
    inside = r2 < d2
    u2[inside] = np.exp(-d2 / (d2 - r2[inside]))
    return np.ones_like(X), u2


class PredPreyOperators:
    """Transport matrices and reaction constants of one configuration."""

    def __init__(self, n=20, diffusivity=0.01, velocity_prey=(0.0, 0.0), velocity_predator=(0.5, 0.5),
                 a=(0.25, 2.0, 1.0, 3.4)):
        if int(n) < 2:
            raise ContractViolation("predprey grid needs n >= 2")
        self.n = int(n)
        self.cells = self.n * self.n
        self.a = tuple(float(x) for x in a)
        self.ops = (transport_operator(self.n, diffusivity, velocity_prey),
                    transport_operator(self.n, diffusivity, velocity_predator))

    def _check(self, field):
        field = np.asarray(field, dtype=np.float64)
        if field.shape != (self.cells,):
            raise ContractViolation(f"field has shape {field.shape}, grid expects ({self.cells},)")
        return field

    def rhs(self, u1, u2, t=0.0):
        """Full semi-discrete velocity of both species."""
        u1, u2 = self._check(u1), self._check(u2)
        f1, f2 = reaction(u1, u2, self.a)
        return self.ops[0] @ u1 + f1, self.ops[1] @ u2 + f2


def predprey_rhs(u1, u2, t=0.0, operators=None):
    """Semi-discrete velocity of the default configuration (or ``operators``)."""
    return (operators or PredPreyOperators()).rhs(u1, u2, t)


def predprey_system(operators: PredPreyOperators) -> CoupledOdeSystem:
    N = operators.cells
    eye = scipy.sparse.identity(N, format="csr")

    def sub(k):
        L = operators.ops[k]
        return Subsystem(
            name=("prey", "predator")[k], dim=N, cdim=N,
            velocity=lambda u, c, t: L @ u + c,
            jac_u=lambda u, c, t: L,
            jac_c=lambda u, c, t: eye,
            bandwidth=operators.n,
        )

    def coupling(i, parts, t):
        return reaction(operators._check(parts[0]), operators._check(parts[1]), operators.a)[i]

    def jac_coupling(i, j, parts, t):
        d = reaction_jacobian(parts[0], parts[1], operators.a)[i][j]
        return scipy.sparse.diags(np.broadcast_to(d, (N,)).astype(float), format="csr")

    return CoupledOdeSystem(subsystems=[sub(0), sub(1)], coupling=coupling, jac_coupling=jac_coupling,
                            structure=FULL, name="predprey")


def build(**overrides) -> Problem:
    p = merge_params(DEFAULTS, overrides, "predprey")
    ops = PredPreyOperators(p["n"], p["diffusivity"], p["velocity_prey"], p["velocity_predator"],
                            (p["a1"], p["a2"], p["a3"], p["a4"]))
    sys = predprey_system(ops)
    u1, u2 = initial_state(ops.n, p["center"], p["radius"])
    h2 = 1.0 / ops.cells

    def observables(u):
        prey, pred = sys.split(u)
        return {"prey_total": prey.sum() * h2, "predator_total": pred.sum() * h2,
                "prey_max": prey.max(), "predator_max": pred.max()}

    return Problem(name="predprey", system=sys, u0=sys.join([u1, u2]), t_final=float(p["t_final"]),
                   blocks={"prey": [0], "predator": [1]}, params=p, observables=observables, model=ops)

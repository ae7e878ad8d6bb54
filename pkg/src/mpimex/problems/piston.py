"""One-dimensional piston: fluid, mesh pseudo-structure and mass-spring structure.

Subsystems are ordered (structure, mesh, fluid).

* structure: ``u_s = (piston velocity, piston displacement)``, mass
  ``diag(m_s, 1)``; the coupling is the external force, minus the
  momentum flux of the fluid on the piston face. The face sits at
  ``x = 1 - displacement``.
* mesh: displacements and velocities of the interior nodes of a uniform
  reference grid on ``[0, 1]``, moved by a damped wave equation with the
  left end fixed and the right end following the piston.
* fluid: ``g U`` per cell on the reference grid (first-order finite
  volumes, Roe flux with moving faces, reflecting walls).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from ..errors import ContractViolation, MeshTanglingError
from ..system import SPECIAL_TRIANGULAR, CoupledOdeSystem, Subsystem
from .base import Problem, merge_params
from .euler import conservative, primitive, roe_flux, wall_ghost

DEFAULTS = {
    "gamma": 1.4,
    "cells": 128,
    "rho0": 1.0, "velocity0": 0.0, "p0": 0.4,
    "rho_m": 1.0, "E_m": 1.0, "c_m": 0.0,
    "m_s": 1.0, "k_s": 1.0, "c_s": 0.0,
    "displacement0": -0.3,
    "t_final": 1.0,
    "pinned": False,
}

STRUCTURE, MESH, FLUID = 0, 1, 2
DEPENDS = np.array([[True, True, True], [True, False, False], [True, True, False]])


def piston_ale_velocity(fluid_state, x_nodes, v_nodes, gamma=1.4):
    """Finite-volume residual of the reference-domain Euler equations.

    ``fluid_state`` holds ``g U`` cell by cell (flattened, 3 per cell);
    ``x_nodes`` and ``v_nodes`` are the physical positions and velocities of
    the ``cells + 1`` grid nodes. Both ends are reflecting walls moving with
    the end-node velocity.
    """
    UX = np.asarray(fluid_state, dtype=np.float64).reshape(-1, 3)
    n = UX.shape[0]
    x_nodes = np.asarray(x_nodes, dtype=np.float64)
    v_nodes = np.asarray(v_nodes, dtype=np.float64)
    if x_nodes.shape != (n + 1,) or v_nodes.shape != (n + 1,):
        raise ContractViolation(f"{n} cells need {n + 1} nodal positions and velocities")
    dX = 1.0 / n
    g = np.diff(x_nodes) / dX
    if np.any(~(g > 0)):
        raise MeshTanglingError(f"mesh map is not monotone (min g = {g.min():.3e})")
    U = UX / g[:, None]
    left = np.concatenate([wall_ghost(U[:1], v_nodes[0], gamma), U])
    right = np.concatenate([U, wall_ghost(U[-1:], v_nodes[-1], gamma)])
    F = roe_flux(left, right, gamma, v_nodes)
    return (-(F[1:] - F[:-1]) / dX).ravel()


def wall_force(last_cell, g_last, wall_velocity, gamma):
    """Momentum flux through the right wall face for the last fluid cell."""
    U = np.asarray(last_cell, dtype=np.float64) / g_last
    if not g_last > 0:
        raise MeshTanglingError(f"last cell has g = {g_last:.3e}")
    return float(roe_flux(U, wall_ghost(U, wall_velocity, gamma), gamma, wall_velocity)[1])


class PistonModel:
    """Parameters and grid of one piston configuration."""

    def __init__(self, **params):
        self.p = merge_params(DEFAULTS, params, "piston")
        self.n = int(self.p["cells"])
        if self.n < 2:
            raise ContractViolation("piston needs at least 2 fluid cells")
        self.gamma = float(self.p["gamma"])
        self.X = np.linspace(0.0, 1.0, self.n + 1)
        self.dX = 1.0 / self.n

    # -- state layout --------------------------------------------------------
    def nodes(self, structure, mesh):
        """Physical nodal positions and velocities on the full grid."""
        k = self.n - 1
        d = np.concatenate([[0.0], mesh[:k], [-structure[1]]])
        w = np.concatenate([[0.0], mesh[k:], [-structure[0]]])
        return self.X + d, w

    def initial_state(self):
        p = self.p
        us0 = float(p["displacement0"])
        structure = np.array([0.0, us0])
        mesh = np.concatenate([-us0 * self.X[1:-1], np.zeros(self.n - 1)])
        x, _ = self.nodes(structure, mesh)
        g = np.diff(x) / self.dX
        U = conservative(p["rho0"], p["velocity0"], p["p0"], self.gamma)
        fluid = (g[:, None] * U[None, :]).ravel()
        return structure, mesh, fluid

    def fluid_mass(self, fluid):
        return float(fluid.reshape(-1, 3)[:, 0].sum() * self.dX)

    # -- subsystems ----------------------------------------------------------
    def structure_subsystem(self):
        p = self.p
        m_s, k_s, c_s = float(p["m_s"]), float(p["k_s"]), float(p["c_s"])
        if p["pinned"]:
            zero = np.zeros((2, 2))
            return Subsystem("structure", 2, 1, lambda u, c, t: np.zeros(2),
                             jac_u=lambda u, c, t: zero, jac_c=lambda u, c, t: np.zeros((2, 1)),
                             mass=np.array([m_s, 1.0]))
        ju = np.array([[-c_s, -k_s], [1.0, 0.0]])
        jc = np.array([[1.0], [0.0]])
        return Subsystem(
            "structure", 2, 1,
            velocity=lambda u, c, t: np.array([c[0] - c_s * u[0] - k_s * u[1], u[0]]),
            jac_u=lambda u, c, t: ju, jac_c=lambda u, c, t: jc,
            mass=np.array([m_s, 1.0]),
        )

    def mesh_subsystem(self):
        k = self.n - 1
        stiff = float(self.p["E_m"]) / self.dX ** 2
        damp = float(self.p["c_m"])
        lap = scipy.sparse.diags([np.ones(k - 1), -2.0 * np.ones(k), np.ones(k - 1)], [-1, 0, 1])
        eye = scipy.sparse.identity(k)
        J = scipy.sparse.bmat([[None, eye], [stiff * lap, -damp * eye]], format="csr")
        Jc = scipy.sparse.csr_matrix(([stiff], ([2 * k - 1], [0])), shape=(2 * k, 2))

        def velocity(u, c, t):
            d, w = u[:k], u[k:]
            acc = stiff * (np.concatenate([d[1:], c[:1]]) - 2.0 * d + np.concatenate([[0.0], d[:-1]])) - damp * w
            return np.concatenate([w, acc])

        return Subsystem("mesh", 2 * k, 2, velocity, jac_u=lambda u, c, t: J, jac_c=lambda u, c, t: Jc,
                         mass=np.concatenate([np.ones(k), np.full(k, float(self.p["rho_m"]))]))

    def fluid_subsystem(self):
        n1 = self.n + 1
        return Subsystem(
            "fluid", 3 * self.n, 2 * n1,
            velocity=lambda u, c, t: piston_ale_velocity(u, c[:n1], c[n1:], self.gamma),
            bandwidth=5,
        )

    def coupling(self, i, parts, t):
        s, x, f = parts
        if i == STRUCTURE:
            xn, vn = self.nodes(s, x)
            g_last = (xn[-1] - xn[-2]) / self.dX
            return np.array([-wall_force(f[-3:], g_last, vn[-1], self.gamma)])
        if i == MESH:
            return np.array([-s[1], -s[0]])
        xn, vn = self.nodes(s, x)
        return np.concatenate([xn, vn])

    def system(self) -> CoupledOdeSystem:
        return CoupledOdeSystem(
            subsystems=[self.structure_subsystem(), self.mesh_subsystem(), self.fluid_subsystem()],
            coupling=self.coupling, depends=DEPENDS, structure=SPECIAL_TRIANGULAR, name="piston",
        )


def build(**overrides) -> Problem:
    model = PistonModel(**overrides)
    sys = model.system()

    def observables(u):
        s, _, f = sys.split(u)
        return {"piston_velocity": s[0], "piston_displacement": s[1], "fluid_mass": model.fluid_mass(f)}

    return Problem(name="piston", system=sys, u0=sys.join(list(model.initial_state())),
                   t_final=float(model.p["t_final"]),
                   blocks={"fluid": [FLUID], "mesh": [MESH], "structure": [STRUCTURE]},
                   params=dict(model.p), observables=observables, model=model)

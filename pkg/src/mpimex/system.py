"""Coupled multiphysics ODE systems.

A system is an ordered list of ``m`` subsystems

    M^i du^i/dt = r^i(u^i, c^i, t),     c^i = c^i(u^1, ..., u^m, t),

where the coupling term ``c^i`` carries everything subsystem ``i`` needs
from the others. States are handled either as a list of per-subsystem
arrays ("parts") or as one concatenated flat vector; ``split`` and ``join``
convert between the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse

from .errors import ContractViolation, NumericFailure

FULL = "full"
SPECIAL_TRIANGULAR = "special_triangular"

_SQRT_EPS = float(np.sqrt(np.finfo(np.float64).eps))


@dataclass
class Subsystem:
    """One physical subsystem ``M u' = r(u, c, t)``.

    ``mass`` is ``None`` for the identity or a 1-D array holding a diagonal
    mass operator. Jacobians are optional; they may return dense arrays or
    scipy sparse matrices. ``bandwidth`` is the half-bandwidth of
    ``d r / d u`` and enables colored finite-difference probing when no
    analytic Jacobian is supplied.
    """

    name: str
    dim: int
    cdim: int
    velocity: Callable
    jac_u: Optional[Callable] = None
    jac_c: Optional[Callable] = None
    mass: Optional[np.ndarray] = None
    bandwidth: Optional[int] = None

    def __post_init__(self):
        if self.mass is not None:
            self.mass = np.asarray(self.mass, dtype=np.float64)
            if self.mass.shape != (self.dim,):
                raise ContractViolation(f"{self.name}: mass diagonal must have length {self.dim}")
            if np.any(self.mass == 0):
                raise ContractViolation(f"{self.name}: mass diagonal has zero entries")

    def mass_apply(self, u):
        return u if self.mass is None else self.mass * u

    def mass_solve(self, v):
        return v if self.mass is None else v / self.mass

    def mass_matrix(self, sparse=False):
        diag = np.ones(self.dim) if self.mass is None else self.mass
        return scipy.sparse.diags(diag, format="csc") if sparse else np.diag(diag)

    @property
    def has_jacobians(self):
        return self.jac_u is not None and self.jac_c is not None


@dataclass
class CoupledOdeSystem:
    """An ordered collection of subsystems plus their coupling terms.

    Parameters
    ----------
    coupling : callable ``(i, parts, t) -> c_i``
    jac_coupling : optional callable ``(i, j, parts, t) -> d c_i / d u_j``
    depends : optional ``m x m`` boolean pattern, ``depends[i][j]`` true when
        ``c_i`` may vary with ``u_j``. Defaults to all true.
    structure : ``"full"`` or ``"special_triangular"`` (c_i depends only on
        u_1..u_i for every i >= 2).
    """

    subsystems: Sequence[Subsystem]
    coupling: Callable
    jac_coupling: Optional[Callable] = None
    depends: Optional[np.ndarray] = None
    structure: str = FULL
    name: str = "system"
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.subsystems = list(self.subsystems)
        m = len(self.subsystems)
        if self.depends is None:
            self.depends = np.ones((m, m), dtype=bool)
        self.depends = np.asarray(self.depends, dtype=bool)
        if self.depends.shape != (m, m):
            raise ContractViolation("depends pattern must be m x m")
        if self.structure not in (FULL, SPECIAL_TRIANGULAR):
            raise ContractViolation(f"unknown structure {self.structure!r}")
        self.offsets = np.concatenate([[0], np.cumsum([s.dim for s in self.subsystems])]).astype(int)

    @property
    def m(self) -> int:
        return len(self.subsystems)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    def split(self, u) -> list[np.ndarray]:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.dim,):
            raise ContractViolation(f"state has shape {u.shape}, system expects ({self.dim},)")
        return [u[self.offsets[i]:self.offsets[i + 1]] for i in range(self.m)]

    def join(self, parts) -> np.ndarray:
        if len(parts) != self.m:
            raise ContractViolation(f"expected {self.m} parts, got {len(parts)}")
        for p, s in zip(parts, self.subsystems):
            if np.shape(p) != (s.dim,):
                raise ContractViolation(f"{s.name}: part has shape {np.shape(p)}, expected ({s.dim},)")
        return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts]) if parts else np.zeros(0)

    def couplings(self, parts, t) -> list[np.ndarray]:
        return [np.asarray(self.coupling(i, parts, t), dtype=np.float64) for i in range(self.m)]

    def velocity_parts(self, parts, t) -> list[np.ndarray]:
        cs = self.couplings(parts, t)
        return [s.velocity(p, c, t) for s, p, c in zip(self.subsystems, parts, cs)]

    def mass_apply(self, u):
        return self.join([s.mass_apply(p) for s, p in zip(self.subsystems, self.split(u))])

    def mass_solve(self, v):
        return self.join([s.mass_solve(p) for s, p in zip(self.subsystems, self.split(v))])

    def coupling_jacobian(self, i, j, parts, t):
        """``d c_i / d u_j`` (analytic when available, otherwise finite differences)."""
        cdim, ndim = self.subsystems[i].cdim, self.subsystems[j].dim
        if not self.depends[i, j]:
            return scipy.sparse.csr_matrix((cdim, ndim))
        if self.jac_coupling is not None:
            return self.jac_coupling(i, j, parts, t)

        def f(uj):
            probe = list(parts)
            probe[j] = uj
            return self.coupling(i, probe, t)

        return fd_jacobian(f, parts[j])

    def velocity_jacobian(self, u, t):
        """Total derivative ``D_u r = dr/du + dr/dc dc/du`` as a dense matrix.

        Assembled from the declared blocks; falls back to finite differences
        of the monolithic velocity when any analytic block is missing.
        """
        parts = self.split(u)
        if not all(s.has_jacobians for s in self.subsystems):
            return fd_jacobian(lambda v: monolithic_velocity(self, v, t), u)
        cs = self.couplings(parts, t)
        J = np.zeros((self.dim, self.dim))
        o = self.offsets
        for i, s in enumerate(self.subsystems):
            rows = slice(o[i], o[i + 1])
            J[rows, rows] += _dense(s.jac_u(parts[i], cs[i], t))
            drdc = _dense(s.jac_c(parts[i], cs[i], t))
            for j in range(self.m):
                if self.depends[i, j]:
                    J[rows, o[j]:o[j + 1]] += drdc @ _dense(self.coupling_jacobian(i, j, parts, t))
        return J


def _dense(A):
    return A.toarray() if scipy.sparse.issparse(A) else np.atleast_2d(np.asarray(A, dtype=np.float64))


def monolithic_velocity(sys: CoupledOdeSystem, u, t) -> np.ndarray:
    """Concatenated ``r^i(u^i, c^i(u, t), t)`` for all subsystems."""
    return sys.join(sys.velocity_parts(sys.split(u), t))


def fd_jacobian(f, u, bandwidth=None):
    """Central-difference Jacobian of ``f`` at ``u``.

    Column ``k`` uses the step ``sqrt(eps) * (1 + |u_k|)``. With
    ``bandwidth=b`` the Jacobian is assumed banded with half-bandwidth ``b``;
    columns are probed in ``2b + 1`` interleaved groups and a sparse matrix
    is returned.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    f0 = np.asarray(f(u), dtype=np.float64)
    if not np.all(np.isfinite(f0)):
        raise NumericFailure("function is not finite at the expansion point")
    h = _SQRT_EPS * (1.0 + np.abs(u))

    if bandwidth is None or 2 * bandwidth + 1 >= n:
        J = np.empty((f0.size, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h[k]
            fp, fm = np.asarray(f(u + e)), np.asarray(f(u - e))
            if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
                raise NumericFailure(f"non-finite evaluation while probing column {k}")
            J[:, k] = (fp - fm) / (2.0 * h[k])
        return J

    if f0.size != n:
        raise ContractViolation("banded probing requires a square Jacobian")
    width = 2 * bandwidth + 1
    diffs = np.empty((width, n))
    for color in range(width):
        e = np.zeros(n)
        e[color::width] = h[color::width]
        fp, fm = np.asarray(f(u + e)), np.asarray(f(u - e))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericFailure(f"non-finite evaluation while probing color {color}")
        diffs[color] = fp - fm
    cols = np.repeat(np.arange(n), width)
    rows = cols + np.tile(np.arange(-bandwidth, bandwidth + 1), n)
    keep = (rows >= 0) & (rows < n)
    rows, cols = rows[keep], cols[keep]
    vals = diffs[cols % width, rows] / (2.0 * h[cols])
    return scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))

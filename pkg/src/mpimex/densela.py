"""Small dense linear algebra kernels.

Matrices are plain 2-D ``float64`` numpy arrays. The factorization and the
eigensolver are LAPACK (partial-pivoting LU, Hessenberg + shifted QR) behind
the contracts below; ``solve`` additionally dispatches sparse stage Jacobians
to SuperLU.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ContractViolation, NumericFailure, SingularMatrixError

_PIVOT_RTOL = 1e-14


def _lu_factor(A):
    # singularity is reported through the pivot check below, not LAPACK's warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        return scipy.linalg.lu_factor(A, check_finite=False)


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{name} has non-finite entries")
    return A


def lu_solve(A, B):
    """Solve ``A X = B`` by LU with partial pivoting.

    ``B`` may be a vector or an n-by-k matrix. Raises
    :class:`SingularMatrixError` when a pivot is below ``1e-14 * ||A||_inf``.
    """
    A = _as_square(A)
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != A.shape[0]:
        raise ContractViolation(f"right-hand side has {B.shape[0]} rows, A has {A.shape[0]}")
    n = A.shape[0]
    if n == 0:
        return B.copy()
    norm = np.abs(A).sum(axis=1).max()
    lu, piv = _lu_factor(A)
    pivots = np.abs(np.diag(lu))
    if norm == 0.0 or pivots.min() < _PIVOT_RTOL * norm:
        raise SingularMatrixError(f"singular matrix (min pivot {pivots.min():.3e}, norm {norm:.3e})")
    return scipy.linalg.lu_solve((lu, piv), B, check_finite=False)


class Factorization:
    """LU factors of a dense or sparse square matrix, reusable across solves."""

    def __init__(self, J):
        if scipy.sparse.issparse(J):
            try:
                self._lu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(J))
            except RuntimeError as exc:  # SuperLU reports exact singularity this way
                raise SingularMatrixError(str(exc)) from exc
            self._dense = False
        elif np.shape(J) == (1, 1):
            # scalar stages are common enough for the LAPACK call overhead to dominate
            a = float(J[0, 0])
            if not np.isfinite(a):
                raise ContractViolation("J has non-finite entries")
            if a == 0.0:
                raise SingularMatrixError("singular matrix (zero 1x1 pivot)")
            self._lu = a
            self._dense = None
        else:
            A = _as_square(J, "J")
            norm = np.abs(A).sum(axis=1).max() if A.size else 0.0
            self._lu = _lu_factor(A)
            pivots = np.abs(np.diag(self._lu[0]))
            if A.size and (norm == 0.0 or pivots.min() < _PIVOT_RTOL * norm):
                raise SingularMatrixError(f"singular matrix (min pivot {pivots.min():.3e}, norm {norm:.3e})")
            self._dense = True

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=np.float64)
        if self._dense is None:
            return rhs / self._lu
        if self._dense:
            return scipy.linalg.lu_solve(self._lu, rhs, check_finite=False)
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("sparse solve produced non-finite values")
        return x


def factorize(J) -> Factorization:
    return Factorization(J)


def solve(J, rhs):
    """Solve a stage Newton system whose Jacobian may be dense or sparse."""
    if scipy.sparse.issparse(J):
        return Factorization(J).solve(rhs)
    return lu_solve(J, rhs)


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a small dense matrix, as a complex array."""
    A = _as_square(A)
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    return lam.astype(np.complex128)


def eig(A):
    """Eigenvalues and right eigenvectors ``(w, V)`` with ``A V = V diag(w)``."""
    A = _as_square(A)
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    return w.astype(np.complex128), V.astype(np.complex128)


def spectral_radius(A) -> float:
    A = _as_square(A)
    if A.shape[0] == 0:
        return 0.0
    return float(np.abs(eigenvalues(A)).max())

"""Linear stability of partitioned IMEX schemes.

For a linear homogeneous system every scheme is a one-step map
``u_n = C u_{n-1}``. ``probe_update_matrix`` recovers ``C`` column by column
from the integrator itself; the closed forms below are the model-problem
amplification factors they are checked against.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import densela
from .errors import ContractViolation, MpimexError, SingularParameterError
from .integrator import DEFAULT_NEWTON, step
from .predictor import PredictorKind
from .system import FULL, CoupledOdeSystem, Subsystem, monolithic_velocity
from .tableau import ImexTableau, builtin_tableau

STABLE_TOL = 1e-12
MAX_PROBE_DIM = 64

# p_ij of the third-order ratio (row i multiplies x1^i, column j multiplies x2^j)
ARK3_P = np.array([
    [1.0, -0.307599564300000, -0.237660691030414, 0.0],
    [-0.307599564300000, 0.0946174918786356, 0.0731043252393467, 0.0],
    [-0.237660691030414, 0.0731043252393467, 0.0, -0.0138993203184737],
    [0.0, 0.0, -0.0138993202982233, 0.00685679356380471],
])

ARK4_P = np.array([
    [1.0, -0.25, -0.125, 0.0104166666865151, 0.00911458332517619, 0.0],
    [-0.25, 0.06245, 0.03125, -0.00260416668514596, -0.00407734171291718, 0.0],
    [-0.125, 0.03125, 0.015625, 0.00606937261393480, -0.00389797283406001, 1.71399137262393e-4],
    [0.0104166666865151, -0.00260416668792851, 0.00606937262572686, -0.00535453941337523,
     0.00164424787309041, -8.30991742855789e-5],
    [0.00911458332517619, -0.00407734171177262, -0.00389797283635686, 0.00164424787343589,
     -8.99044034172063e-5, 7.55399650866135e-6],
    [0.0, 0.0, 1.71399137131092e-4, -8.30991742950535e-5, 7.55399650329534e-6, 9.53674314457072e-7],
])

# Two reference entries disagree with the update matrix of the tableaus: the
# third-order p_22 is given as 0 and the fourth-order p_11 as 0.06245. The
# corrected sets replace just those entries (0.0625 = p_01^2 follows the
# rank-one pattern of the neighbouring entries).
ARK3_P_CORRECTED = ARK3_P.copy()
ARK3_P_CORRECTED[2, 2] = 0.10827677331
ARK4_P_CORRECTED = ARK4_P.copy()
ARK4_P_CORRECTED[1, 1] = 0.0625
for _table in (ARK3_P, ARK4_P, ARK3_P_CORRECTED, ARK4_P_CORRECTED):
    _table.setflags(write=False)

# (p table, diagonal coefficient a, power d) with q = (1 - a x1)^d (1 - a x2)^d
ARK_RATIO_DATA = {3: (ARK3_P, 0.4358665216, 3), 4: (ARK4_P, 0.25, 5)}
ARK_CORRECTED = {3: ARK3_P_CORRECTED, 4: ARK4_P_CORRECTED}


@dataclass
class StabilityReport:
    update_matrix: np.ndarray
    eigenvalues: np.ndarray
    rho: float
    stable: bool
    params: dict = field(default_factory=dict)
    warning: Optional[str] = None


def _is_linear_homogeneous(sys, t=0.0):
    return float(np.abs(monolithic_velocity(sys, np.zeros(sys.dim), t)).max(initial=0.0)) <= 1e-14


def probe_update_matrix(sys: CoupledOdeSystem, tableau: ImexTableau, kind, dt: float,
                        newton=DEFAULT_NEWTON, check_linearity=True) -> np.ndarray:
    """Update matrix of one step, column ``k`` being the step applied to ``e_k``.

    ``kind`` may be any predictor or ``"monolithic"``.
    """
    n = sys.dim
    if n > MAX_PROBE_DIM:
        raise ContractViolation(f"probing is limited to {MAX_PROBE_DIM} unknowns, system has {n}")
    if not _is_linear_homogeneous(sys):
        raise ContractViolation("velocity at u = 0 is nonzero; the system is not linear homogeneous")
    # an absolute residual floor is the one Newton decision that is not scale
    # free; without it step(2u) is bitwise 2 step(u) for a linear step
    newton = replace(newton, abs_tol=math.ulp(0.0))
    # a linear system has state-independent stage matrices, so factors are shared by all columns
    cache = {} if newton.reuse_jacobian else None
    C = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        C[:, k] = step(sys, tableau, kind, e, 0.0, dt, newton, jacobian_cache=cache)
    if check_linearity:
        # fresh factors here, so a state-dependent Jacobian cannot hide behind the cache
        u = 1.0 + np.arange(n) / max(n, 1)
        lhs = step(sys, tableau, kind, 2.0 * u, 0.0, dt, newton)
        rhs = 2.0 * step(sys, tableau, kind, u, 0.0, dt, newton)
        if np.abs(lhs - rhs).max(initial=0.0) > 1e-10 * (1.0 + np.abs(rhs).max(initial=0.0)):
            raise ContractViolation("one step is not linear in the state")
    return C


def non_unit_eigenvalue(eigs) -> complex:
    """Of the eigenvalues of a 2x2 model update matrix, the one that is not 1."""
    eigs = np.asarray(eigs, dtype=np.complex128)
    if eigs.size < 2:
        raise ContractViolation("need at least two eigenvalues")
    drop = int(np.argmin(np.abs(eigs - 1.0)))
    rest = np.delete(eigs, drop)
    return complex(rest[np.argmax(np.abs(rest))])


def stability_report(sys, tableau, kind, dt, params=None, newton=DEFAULT_NEWTON) -> StabilityReport:
    C = probe_update_matrix(sys, tableau, kind, dt, newton)
    eigs = densela.eigenvalues(C)
    rho = float(np.abs(eigs).max(initial=0.0))
    warning = None
    unit = np.abs(np.abs(eigs) - 1.0) <= 1e-9
    if unit.sum() > 1:
        warning = f"{int(unit.sum())} eigenvalues of unit magnitude; eigenspace condition not checked"
    return StabilityReport(update_matrix=C, eigenvalues=eigs, rho=rho, stable=rho <= 1.0 + STABLE_TOL,
                           params=dict(params or {}, dt=dt), warning=warning)


def _ratio(num, den):
    if den == 0.0:
        raise SingularParameterError("denominator vanishes at these parameters")
    return num / den


def closed_form_factor_imex1(kind, dt, lambda1, lambda2, alpha) -> float:
    """Non-unit eigenvalue of the forward-backward Euler update on the model problem."""
    kind = PredictorKind.parse(kind)
    x1, x2 = dt * lambda1, dt * lambda2
    b = 1.0 - alpha
    if kind is PredictorKind.WEAK_JACOBI:
        return _ratio((1 + alpha * x1) * (1 + alpha * x2) - x1 * x2, (1 - b * x2) * (1 - b * x1))
    if kind is PredictorKind.STRONG_JACOBI:
        return _ratio(1 - x1 * x2, (1 - x1) * (1 - x2))
    if kind is PredictorKind.WEAK_GS:
        return _ratio((1 + alpha * x1) * (1 + alpha * x2), (1 - b * x1) * (1 - b * x2))
    if kind is PredictorKind.STRONG_GS:
        return _ratio(1.0, (1 - x1) * (1 - x2))
    raise ContractViolation(f"no closed form for predictor {kind}")


def closed_form_factor_imex2_strong_gs(dt, lambda1, lambda2) -> float:
    """Product of the two trapezoidal amplification factors (independent of alpha)."""
    x1, x2 = dt * lambda1, dt * lambda2
    return _ratio(1 + x1 / 2, 1 - x1 / 2) * _ratio(1 + x2 / 2, 1 - x2 / 2)


def closed_form_factor_imex2_weak_gs(dt, lambda1, lambda2, alpha) -> float:
    """Second-order weak Gauss-Seidel factor, in its reference form."""
    x1, x2 = dt * lambda1, dt * lambda2
    num = (1 + (x1 + x2) / 2 * (1 + alpha) + x1 * x2 / 4 * (1 + alpha) ** 2
           + (x1 * x1 + x2 * x2) / 2 * alpha + x1 * x2 * (x1 + x2) / 4 * alpha ** 2)
    return _ratio(num, (1 - (1 - alpha) * x1 / 2) * (1 - (1 - alpha) * x2 / 2))


def closed_form_factor_imex2_strong_jacobi(dt, lambda1, lambda2, as_tabulated=False) -> float:
    """Second-order strong Jacobi factor.

    The reference form repeats ``x1`` in the numerator and ``x2`` in the
    denominator; the default uses one factor of each, which is what the
    probed update matrix follows. ``as_tabulated=True`` keeps the reference form.
    """
    x1, x2 = dt * lambda1, dt * lambda2
    cubic = dt ** 3 / 4 * (lambda1 ** 2 * lambda2 + lambda2 ** 2 * lambda1)
    if as_tabulated:
        return _ratio((1 + x1 / 2) * (1 + x1 / 2) - cubic, (1 - x2 / 2) * (1 - x2 / 2))
    return _ratio((1 + x1 / 2) * (1 + x2 / 2) - cubic, (1 - x1 / 2) * (1 - x2 / 2))


def ark_q_coefficients(order) -> np.ndarray:
    """Coefficients ``q_ij`` of ``(1 - a x1)^d (1 - a x2)^d``."""
    _, a, d = _ark_data(order)
    one = np.array([math.comb(d, i) * (-a) ** i for i in range(d + 1)])
    return np.outer(one, one)


def _ark_data(order):
    try:
        return ARK_RATIO_DATA[int(order)]
    except (KeyError, ValueError, TypeError):
        raise ContractViolation(f"ark_ratio is defined for orders 3 and 4, got {order!r}") from None


def ark_ratio(order, x1, x2, corrected=False) -> float:
    """``|p(x1, x2) / q(x1, x2)|`` for the third- or fourth-order strong Gauss-Seidel update.

    Uses the reference coefficient tables unless ``corrected`` is set.
    """
    P, a, d = _ark_data(order)
    if corrected:
        P = ARK_CORRECTED[int(order)]
    q = (1.0 - a * x1) ** d * (1.0 - a * x2) ** d
    if q == 0.0:
        raise SingularParameterError(f"q vanishes at x = ({x1}, {x2})")
    p = np.polynomial.polynomial.polyval2d(x1, x2, P)
    return abs(float(p) / q)


def ark_table_bound_holds(order, corrected=False) -> np.ndarray:
    """Entrywise ``|p_ij| <= (-1)^(i+j) q_ij`` on the coefficient table (boolean array)."""
    P, _, _ = _ark_data(order)
    if corrected:
        P = ARK_CORRECTED[int(order)]
    Q = ark_q_coefficients(order)[:P.shape[0], :P.shape[1]]
    signs = (-1.0) ** np.add.outer(np.arange(P.shape[0]), np.arange(P.shape[1]))
    return np.abs(P) <= signs * Q


def reduced_decoupled_factor(dt, lambda1, lambda2) -> float:
    """``|(1 + dt lambda2) / (1 - dt lambda1)|``, the single-field reduction of the strong GS scheme."""
    return abs(_ratio(1.0 + dt * lambda2, 1.0 - dt * lambda1))


# -- scans -------------------------------------------------------------------

SCAN_COLUMNS = ("scheme", "predictor", "dt", "lambda1", "lambda2", "alpha", "rho", "stable", "error")


def expand_grid(grid) -> list[dict]:
    """Dict of lists to a list of points in lexicographic index order; lists pass through."""
    if isinstance(grid, dict):
        keys = list(grid)
        return [dict(zip(keys, values)) for values in itertools.product(*(list(grid[k]) for k in keys))]
    return [dict(p) for p in grid]


def scan_stability(family: Callable, scheme, kind, grid, *, workers: int = 0, newton=DEFAULT_NEWTON) -> list[dict]:
    """Spectral radius at each grid point.

    ``family(**point)`` builds the linear system for a point, which must hold
    ``dt`` plus the family parameters. Failures are recorded in the row's
    ``error`` field and the scan continues. Rows follow the grid order.
    """
    tableau = scheme if isinstance(scheme, ImexTableau) else builtin_tableau(scheme)
    kind_name = kind if kind == "monolithic" else PredictorKind.parse(kind).value
    points = expand_grid(grid)

    def one(point):
        row = {"scheme": tableau.name, "predictor": kind_name, "dt": point.get("dt"),
               "lambda1": point.get("lambda1"), "lambda2": point.get("lambda2"), "alpha": point.get("alpha"),
               "rho": math.nan, "stable": False, "error": ""}
        try:
            params = {k: v for k, v in point.items() if k != "dt"}
            rep = stability_report(family(**params), tableau, kind, float(point["dt"]), params, newton)
            row["rho"], row["stable"] = rep.rho, rep.stable
        except (MpimexError, ArithmeticError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    if workers and workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, points))
    return [one(p) for p in points]


# -- diagonally dominant systems ---------------------------------------------

def split_linear_system(A) -> CoupledOdeSystem:
    """Scalar subsystems ``u_i' = a_ii u_i + c_i`` with ``c = (L + U) u``."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ContractViolation("matrix must be square")
    off = A - np.diag(np.diag(A))

    def sub(i):
        aii = A[i, i]
        return Subsystem(f"u{i + 1}", 1, 1, velocity=lambda u, c, t: aii * u + c,
                         jac_u=lambda u, c, t: np.array([[aii]]), jac_c=lambda u, c, t: np.ones((1, 1)))

    rows = [[(j, a) for j, a in enumerate(off[i]) if a != 0.0] for i in range(n)]

    def coupling(i, parts, t):
        return np.array([sum(a * parts[j][0] for j, a in rows[i])])

    def jac_coupling(i, j, parts, t):
        return np.array([[off[i, j]]])

    return CoupledOdeSystem([sub(i) for i in range(n)], coupling, jac_coupling=jac_coupling,
                            depends=off != 0.0, structure=FULL, name="linear-split")


def diag_dominant_matrix(n, rng) -> np.ndarray:
    """Off-diagonals uniform in [-1, 1]; ``a_ii = -(sum_j |a_ij| + U(0, 1))``."""
    A = rng.uniform(-1.0, 1.0, size=(n, n))
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -(np.abs(A).sum(axis=1) + rng.uniform(0.0, 1.0, size=n)))
    return A


def is_diag_dominant_negative(A) -> bool:
    A = np.asarray(A, dtype=np.float64)
    d = np.diag(A)
    return bool(np.all(d < 0) and np.all(-d >= np.abs(A).sum(axis=1) - np.abs(d)))


def jacobi_update_matrix(A, dt):
    """``(I - dt D)^-1 (I + dt (L + U))``."""
    A = np.asarray(A, dtype=np.float64)
    d = np.diag(A)
    return (np.eye(len(d)) + dt * (A - np.diag(d))) / (1.0 - dt * d)[:, None]


def gauss_seidel_update_matrix(A, dt):
    """``(I - dt L - dt D)^-1 (I + dt U)``."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    return densela.lu_solve(np.eye(n) - dt * np.tril(A), np.eye(n) + dt * np.triu(A, 1))


THEOREM_KINDS = (PredictorKind.WEAK_JACOBI, PredictorKind.STRONG_JACOBI,
                 PredictorKind.WEAK_GS, PredictorKind.STRONG_GS)


def matrix_theorem_check(A, dts, tol=1e-10, kinds=THEOREM_KINDS) -> dict:
    """Probe the forward-backward Euler update for each predictor on ``c = (L + U) u``."""
    A = np.asarray(A, dtype=np.float64)
    sys = split_linear_system(A)
    tab = builtin_tableau("imex1")
    kinds = [PredictorKind.parse(k) for k in kinds]
    max_rho = {k.value: 0.0 for k in kinds}
    formula_gap = 0.0
    for dt in dts:
        for kind in kinds:
            C = probe_update_matrix(sys, tab, kind, dt, check_linearity=False)
            ref = jacobi_update_matrix(A, dt) if kind.is_jacobi else gauss_seidel_update_matrix(A, dt)
            formula_gap = max(formula_gap, float(np.abs(C - ref).max()))
            max_rho[kind.value] = max(max_rho[kind.value], densela.spectral_radius(C))
    in_scope = is_diag_dominant_negative(A)
    return {"in_scope": in_scope, "max_rho": max_rho, "formula_gap": formula_gap,
            "stable": all(r <= 1.0 + tol for r in max_rho.values())}


def diag_dominant_theorem_check(n, count, dts=(0.1, 1.0, 10.0, 1000.0), seed=0, tol=1e-10,
                                kinds=THEOREM_KINDS) -> dict:
    """Random diagonally dominant instances; counts those with ``rho > 1 + tol`` for any kind."""
    if not 1 <= n <= 16:
        raise ContractViolation("theorem check supports 1 <= n <= 16")
    rng = np.random.default_rng(seed)
    failures, worst, gap = 0, 0.0, 0.0
    for _ in range(count):
        res = matrix_theorem_check(diag_dominant_matrix(n, rng), dts, tol, kinds)
        worst = max(worst, *res["max_rho"].values())
        gap = max(gap, res["formula_gap"])
        failures += not res["stable"]
    return {"n": n, "instances": count, "failures": failures, "max_rho": worst, "formula_gap": gap,
            "passed": failures == 0}

"""Coupling predictors.

A predictor replaces the true coupling ``c^i(u^1, ..., u^m, t)`` inside the
implicit stage solve by ``c~^i`` built from the current stage state ``u`` and
the previous step solution ``u_bar``:

=================  ===========================================================
weak Jacobi        c^i(u_bar^1, ..., u_bar^m)
strong Jacobi      c^i(u_bar^1, ..., u_bar^{i-1}, u^i, u_bar^{i+1}, ..., u_bar^m)
weak Gauss-Seidel  c^i(u^1, ..., u^{i-1}, u_bar^i, ..., u_bar^m)
strong Gauss-Seidel c^i(u^1, ..., u^i, u_bar^{i+1}, ..., u_bar^m)
exact              c^i(u^1, ..., u^m)
=================  ===========================================================

``stage-variant`` is the stage-dependent extrapolation used in earlier
two-field FSI work; it predicts only subsystem 0 and treats the rest like
strong Gauss-Seidel. It has no ODE-level interpretation and is kept as a
control.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation
from .system import CoupledOdeSystem
from .tableau import ImexTableau


class PredictorKind(enum.Enum):
    WEAK_JACOBI = "weak-jacobi"
    STRONG_JACOBI = "strong-jacobi"
    WEAK_GS = "weak-gs"
    STRONG_GS = "strong-gs"
    STAGE_VARIANT = "stage-variant"
    EXACT = "exact"

    @classmethod
    def parse(cls, value) -> "PredictorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ContractViolation(f"unknown predictor {value!r}; expected one of {names}") from None

    @property
    def is_jacobi(self) -> bool:
        return self in (PredictorKind.WEAK_JACOBI, PredictorKind.STRONG_JACOBI)

    @property
    def is_gauss_seidel(self) -> bool:
        return self in (PredictorKind.WEAK_GS, PredictorKind.STRONG_GS, PredictorKind.STAGE_VARIANT)

    @property
    def is_strong(self) -> bool:
        return self in (PredictorKind.STRONG_JACOBI, PredictorKind.STRONG_GS,
                        PredictorKind.STAGE_VARIANT, PredictorKind.EXACT)

    def __str__(self):
        return self.value


PREDICTORS = tuple(k.value for k in PredictorKind)
PARTITIONED_PREDICTORS = (PredictorKind.WEAK_JACOBI, PredictorKind.STRONG_JACOBI,
                    PredictorKind.WEAK_GS, PredictorKind.STRONG_GS)


@dataclass
class PredictorContext:
    """Data available to a predictor at one stage.

    ``u_stage[i]`` holds the current approximation of subsystem ``i`` at this
    stage; ``valid[i]`` says whether it has been solved already (for the
    subsystem being solved it is the live Newton iterate). ``history`` holds
    the true subsystem-0 couplings of earlier stages, used only by the
    stage-variant control.
    """

    u_prev: Sequence[np.ndarray]
    u_stage: Sequence[np.ndarray]
    valid: Optional[Sequence[bool]] = None
    stage: int = 0
    tableau: Optional[ImexTableau] = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.valid is None:
            self.valid = [True] * len(self.u_stage)


def _check_prefix(ctx, upto, kind):
    valid = list(ctx.valid)
    if not all(valid[:upto]):
        raise ContractViolation(f"{kind}: stage states 0..{upto - 1} must be solved before predicting")


def predictor_parts(kind: PredictorKind, i: int, ctx: PredictorContext) -> list[np.ndarray]:
    """The state arguments the predictor passes to ``coupling(i, ...)``."""
    kind = PredictorKind.parse(kind)
    ub, us = list(ctx.u_prev), list(ctx.u_stage)
    m = len(ub)
    if kind is PredictorKind.WEAK_JACOBI:
        return ub
    if kind is PredictorKind.STRONG_JACOBI:
        return ub[:i] + [us[i]] + ub[i + 1:]
    if kind is PredictorKind.WEAK_GS:
        _check_prefix(ctx, i, kind)
        return us[:i] + ub[i:]
    if kind in (PredictorKind.STRONG_GS, PredictorKind.STAGE_VARIANT):
        _check_prefix(ctx, i, kind)
        return us[:i + 1] + ub[i + 1:]
    if kind is PredictorKind.EXACT:
        others = [k for k in range(m) if k != i]
        if not all(ctx.valid[k] for k in others):
            raise ContractViolation("exact predictor needs the full stage state")
        return us
    raise ContractViolation(f"unhandled predictor {kind}")  # pragma: no cover


def predict(kind, i: int, ctx: PredictorContext, sys: CoupledOdeSystem, t: float) -> np.ndarray:
    """Predicted coupling ``c~^i`` for subsystem ``i``."""
    kind = PredictorKind.parse(kind)
    if kind is PredictorKind.STAGE_VARIANT and i == 0:
        if ctx.stage == 0:
            # first stage is explicit (a[0][0] = 0); the true coupling at u_prev is used
            return np.asarray(sys.coupling(0, list(ctx.u_prev), t), dtype=np.float64)
        return stage_variant_predict(ctx.stage, ctx.tableau, ctx.history)
    return np.asarray(sys.coupling(i, predictor_parts(kind, i, ctx), t), dtype=np.float64)


def varies_with_own_state(kind, i: int, sys: CoupledOdeSystem) -> bool:
    """Whether ``c~^i`` changes with ``u^i`` (strong kinds with a real self-dependence)."""
    kind = PredictorKind.parse(kind)
    if kind is PredictorKind.STAGE_VARIANT and i == 0:
        return False
    return kind.is_strong and bool(sys.depends[i, i])


def stage_variant_predict(j: int, tableau: ImexTableau, history) -> np.ndarray:
    """Stage-dependent extrapolation of the subsystem-0 coupling at stage ``j``.

    ``sum_{k<j} (a_hat[j][k] - a[j][k]) / a[j][j] * c_k`` where ``c_k`` are the
    true couplings at the earlier stages of the current step.
    """
    if tableau is None:
        raise ContractViolation("stage-variant predictor needs the tableau")
    if j < 1:
        raise ContractViolation("stage-variant predictor is undefined at the explicit first stage")
    if len(history) < j:
        raise ContractViolation(f"stage {j} needs {j} earlier couplings, history has {len(history)}")
    ajj = tableau.a[j, j]
    if ajj == 0.0:
        raise ContractViolation(f"implicit diagonal a[{j}][{j}] is zero")
    out = np.zeros_like(np.asarray(history[0], dtype=np.float64))
    for k in range(j):
        out = out + (tableau.a_hat[j, k] - tableau.a[j, k]) / ajj * np.asarray(history[k])
    return out


def strong_gs_exactness_check(sys: CoupledOdeSystem, ctx: PredictorContext, t: float = 0.0,
                              tol: float = 1e-14) -> bool:
    """True iff strong Gauss-Seidel predictions equal the true couplings for every i >= 1.

    This is the numerical signature of the special triangular coupling
    structure, under which only the subsystem-0 coupling needs predicting.
    """
    us = list(ctx.u_stage)
    for i in range(1, sys.m):
        exact = np.asarray(sys.coupling(i, us, t), dtype=np.float64)
        pred = predict(PredictorKind.STRONG_GS, i, ctx, sys, t)
        scale = 1.0 + np.abs(exact).max(initial=0.0)
        if np.abs(pred - exact).max(initial=0.0) > tol * scale:
            return False
    return True

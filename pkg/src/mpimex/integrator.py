"""Monolithic and predictor-partitioned IMEX Runge-Kutta stepping.

With a coupling predictor ``c~`` the velocity of the coupled system is split
into an implicit part ``g = r(u, c~)`` and an explicit correction
``f = r(u, c(u)) - r(u, c~)``. The IMEX step then reads, for stages j,

    u_j   = u_prev + sum_{p<j} a_hat[j,p] ke_p + sum_{p<=j} a[j,p] ki_p
    M ki_j = dt g(u_j, t + c_j dt)
    M ke_j = dt f(u_j, t + c_hat_j dt)
    u_n   = u_prev + sum_p b_hat[p] ke_p + sum_p b[p] ki_p

Because every predictor makes ``g`` block diagonal (Jacobi kinds) or block
lower triangular (Gauss-Seidel kinds), the implicit solve of a stage splits
into one Newton solve per subsystem. Each stage runs in two phases: all
implicit subsystem solves, then all explicit evaluations. The explicit
correction needs the true coupling at the complete stage state, and it is
first consumed one stage later, so deferring it changes no computed value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse

from . import densela
from .errors import (ContractViolation, NewtonFailure, NumericFailure, SingularMatrixError, StateValidityError,
                     StepFailure)
from .predictor import PredictorContext, PredictorKind, predict, predictor_parts, varies_with_own_state
from .system import CoupledOdeSystem, fd_jacobian, monolithic_velocity
from .tableau import ImexTableau

DIVERGENCE_THRESHOLD = 1e12


@dataclass(frozen=True)
class NewtonConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_iter: int = 50
    step_tol: float = 1e-13
    reuse_jacobian: bool = True
    refresh_ratio: float = 0.1

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.step_tol <= 0 or self.max_iter < 1:
            raise ContractViolation("Newton tolerances must be positive and max_iter >= 1")


DEFAULT_NEWTON = NewtonConfig()


@dataclass
class StageWorkspace:
    """Per-step storage of stage velocities and stage states.

    Indexing is ``[stage][subsystem]``; entries are ``None`` until computed.
    """

    u_prev: list
    t: float
    dt: float
    tableau: ImexTableau
    kind: PredictorKind
    k_impl: list = field(default_factory=list)
    k_expl: list = field(default_factory=list)
    u_stage: list = field(default_factory=list)
    history: list = field(default_factory=list)
    newton_iters: Optional[np.ndarray] = None
    jacobian_cache: Optional[dict] = None
    coef: Optional[tuple] = None

    @classmethod
    def empty(cls, sys, tableau, kind, u_prev_parts, t, dt):
        s, m = tableau.s, sys.m
        return cls(
            u_prev=list(u_prev_parts), t=t, dt=dt, tableau=tableau, kind=kind,
            k_impl=[[None] * m for _ in range(s)],
            k_expl=[[None] * m for _ in range(s)],
            u_stage=[[None] * m for _ in range(s)],
            newton_iters=np.zeros((s, m), dtype=int),
            # plain floats: numpy scalar indexing dominates these short loops
            coef=(tableau.a.tolist(), tableau.a_hat.tolist(), tableau.b.tolist(), tableau.b_hat.tolist()),
        )

    def t_impl(self, j):
        return self.t + self.tableau.c[j] * self.dt

    def t_expl(self, j):
        return self.t + self.tableau.c_hat[j] * self.dt

    def stage_base(self, i, j):
        """Stage value of subsystem ``i`` before adding its own ``a[j][j] ki_j`` term."""
        a, a_hat = self.coef[0][j], self.coef[1][j]
        base = np.array(self.u_prev[i], dtype=np.float64, copy=True)
        for p in range(j):
            if a_hat[p] != 0.0:
                base += a_hat[p] * self.k_expl[p][i]
            if a[p] != 0.0:
                base += a[p] * self.k_impl[p][i]
        return base

    def context(self, j, valid=None):
        stage = [u if u is not None else self.u_prev[i] for i, u in enumerate(self.u_stage[j])]
        if valid is None:
            valid = [u is not None for u in self.u_stage[j]]
        return PredictorContext(u_prev=self.u_prev, u_stage=stage, valid=valid, stage=j,
                                tableau=self.tableau, history=self.history)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    newton_iters: np.ndarray
    diverged: bool = False

    @property
    def final(self):
        return self.states[-1]


def _norm(x):
    return float(np.abs(x).max()) if x.size else 0.0


def newton_solve(F, jac, k0, cfg: NewtonConfig, *, subsystem=None, stage=None, factor=None,
                 return_factor=False):
    """Newton iteration for ``F(k) = 0``; returns ``(k, iterations)``.

    Converged when ``||F(k)|| <= rel_tol ||F(k0)|| + abs_tol`` (max-norm), or
    when an update is below ``step_tol ||k||``, which catches residuals that
    stall at round-off level. A converged iterate gets one more correction
    from its residual with the last factorization. With ``reuse_jacobian`` the factored
    Jacobian is kept until an iteration reduces the residual by less than
    ``refresh_ratio``; ``factor`` seeds it with factors from an earlier solve.
    """
    k = np.array(k0, dtype=np.float64, copy=True)
    Fk = F(k)
    res = _norm(Fk)
    tol = cfg.rel_tol * res + cfg.abs_tol
    it = 0
    if not cfg.reuse_jacobian:
        factor = None
    while res > tol:
        if it >= cfg.max_iter:
            raise NewtonFailure(f"Newton did not converge in {it} iterations (|F| = {res:.3e})",
                                subsystem=subsystem, stage=stage, residual=res, iterations=it)
        if factor is None:
            factor = densela.factorize(jac(k))
        dk = factor.solve(-Fk)
        last = factor
        k = k + dk
        it += 1
        Fk = F(k)
        if not np.isfinite(Fk).all():
            raise NewtonFailure("non-finite residual during Newton iteration",
                                subsystem=subsystem, stage=stage, residual=float("inf"), iterations=it)
        prev, res = res, _norm(Fk)
        if not cfg.reuse_jacobian or res > cfg.refresh_ratio * prev:
            factor = None
        if _norm(dk) <= cfg.step_tol * _norm(k):
            break
    if it:
        # closing correction from the last residual: the first residual can carry
        # cancellation error far above the converged one, and a factor is at hand
        k = k + last.solve(-Fk)
    return (k, it, factor) if return_factor else (k, it)


def _own_jacobian(sys, i, kind, u_i, parts, ctilde_fn, t):
    """``d/du_i r_i(u_i, c~_i(u_i))`` for subsystem ``i`` at ``u_i``."""
    sub = sys.subsystems[i]
    live = varies_with_own_state(kind, i, sys)
    c = ctilde_fn(u_i)
    if sub.has_jacobians and (not live or sys.jac_coupling is not None):
        J = sub.jac_u(u_i, c, t)
        if live:
            Jc = sub.jac_c(u_i, c, t)
            Jcu = sys.coupling_jacobian(i, i, parts(u_i), t)
            J = J + Jc @ Jcu
        return J
    return fd_jacobian(lambda v: sub.velocity(v, ctilde_fn(v), t), u_i, bandwidth=sub.bandwidth)


def _stage_matrix(sub, J, scale):
    """``M - scale * J`` in the storage format of ``J``."""
    if scipy.sparse.issparse(J):
        return (sub.mass_matrix(sparse=True) - scale * J).tocsc()
    return sub.mass_matrix() - scale * np.atleast_2d(J)


def solve_implicit_stage(i: int, j: int, sys: CoupledOdeSystem, tableau: ImexTableau, kind,
                         workspace: StageWorkspace, newton: NewtonConfig = DEFAULT_NEWTON):
    """Solve the implicit stage equation of subsystem ``i`` at stage ``j``.

    Stores ``k_impl[j][i]`` and ``u_stage[j][i]`` in the workspace and returns
    ``k_impl[j][i]``. Stages with a zero implicit diagonal are direct
    evaluations.
    """
    kind = PredictorKind.parse(kind)
    ws = workspace
    sub = sys.subsystems[i]
    dt = ws.dt
    t_j = ws.t_impl(j)
    ajj = tableau.a[j, j]
    base = ws.stage_base(i, j)
    valid = [u is not None for u in ws.u_stage[j]]
    valid[i] = True
    ctx = ws.context(j, valid=valid)

    def ctilde(u_i):
        ctx.u_stage[i] = u_i
        return predict(kind, i, ctx, sys, t_j)

    if ajj == 0.0:
        k = dt * sub.mass_solve(sub.velocity(base, ctilde(base), t_j))
        u = base
        iters = 0
    else:
        live = varies_with_own_state(kind, i, sys)
        c_fixed = None if live else ctilde(base)

        def cfun(u_i):
            return ctilde(u_i) if live else c_fixed

        def parts(u_i):
            p = list(ctx.u_stage)
            p[i] = u_i
            return predictor_parts(kind, i, PredictorContext(ws.u_prev, p, valid, j, tableau, ws.history))

        # residual in k = (u - base) / a, iterated in the stage value u: forming
        # base + a k afterwards loses eps * |base| when |a dt lambda| is large
        def F(u):
            return sub.mass_apply((u - base) / ajj) - dt * sub.velocity(u, cfun(u), t_j)

        def jac(u):
            return _stage_matrix(sub, _own_jacobian(sys, i, kind, u, parts, cfun, t_j), dt * ajj) / ajj

        cache = ws.jacobian_cache
        key = (i, dt * ajj)
        u, iters, factor = newton_solve(F, jac, base, newton, subsystem=i, stage=j,
                                        factor=None if cache is None else cache.get(key), return_factor=True)
        if cache is not None:
            cache[key] = factor
        k = (u - base) / ajj
    ws.k_impl[j][i] = k
    ws.u_stage[j][i] = u
    ws.newton_iters[j, i] = iters
    return k


def explicit_stage(j: int, sys: CoupledOdeSystem, workspace: StageWorkspace):
    """Explicit correction ``ke_j = dt M^{-1} (r(u_j, c(u_j)) - r(u_j, c~))`` for all subsystems."""
    ws = workspace
    if j == 0 and ws.tableau.a[0, 0] == 0.0:
        # the first stage state is u_prev, where every predictor returns the true coupling
        ws.k_expl[0] = [np.zeros(sub.dim) for sub in sys.subsystems]
        return ws.k_expl[0]
    t_j = ws.t_expl(j)
    us = ws.u_stage[j]
    ctx = ws.context(j, valid=[True] * sys.m)
    for i, sub in enumerate(sys.subsystems):
        c_true = np.asarray(sys.coupling(i, us, t_j), dtype=np.float64)
        c_pred = predict(ws.kind, i, ctx, sys, t_j)
        ws.k_expl[j][i] = ws.dt * sub.mass_solve(sub.velocity(us[i], c_true, t_j) - sub.velocity(us[i], c_pred, t_j))
    return ws.k_expl[j]


def _solve_exact_stage(j, sys, tableau, ws, newton):
    """Joint implicit solve of all subsystems (exact predictor)."""
    t_j = ws.t_impl(j)
    ajj = tableau.a[j, j]
    base = sys.join([ws.stage_base(i, j) for i in range(sys.m)])
    if ajj == 0.0:
        k = ws.dt * sys.mass_solve(monolithic_velocity(sys, base, t_j))
        u, iters = base, 0
    else:
        k, u, iters = _monolithic_newton(sys, base, ajj, ws.dt, t_j, newton, j)
    for i, (kp, up) in enumerate(zip(sys.split(k), sys.split(u))):
        ws.k_impl[j][i] = kp.copy()
        ws.u_stage[j][i] = up.copy()
    ws.newton_iters[j, :] = iters


def _monolithic_newton(sys, base, ajj, dt, t_j, newton, stage):
    M = np.concatenate([np.ones(s.dim) if s.mass is None else s.mass for s in sys.subsystems])

    def F(u):
        return M * (u - base) / ajj - dt * monolithic_velocity(sys, u, t_j)

    def jac(u):
        return (np.diag(M) - dt * ajj * sys.velocity_jacobian(u, t_j)) / ajj

    u, it = newton_solve(F, jac, base, newton, stage=stage)
    return (u - base) / ajj, u, it


def _combine(ws, sys, tableau):
    b, b_hat = ws.coef[2], ws.coef[3]
    out = []
    for i in range(sys.m):
        u = np.array(ws.u_prev[i], dtype=np.float64, copy=True)
        for p in range(tableau.s):
            if b_hat[p] != 0.0:
                u += b_hat[p] * ws.k_expl[p][i]
            if b[p] != 0.0:
                u += b[p] * ws.k_impl[p][i]
        out.append(u)
    return sys.join(out)


def step_partitioned(sys: CoupledOdeSystem, tableau: ImexTableau, kind, u_prev, t: float, dt: float,
                     newton: NewtonConfig = DEFAULT_NEWTON, *, executor=None, return_workspace=False,
                     jacobian_cache=None):
    """Advance ``u_prev`` by one predictor-partitioned IMEX step.

    Jacobi kinds solve the subsystems of a stage independently (on
    ``executor`` when one is given); Gauss-Seidel kinds solve them in order,
    each seeing the stage states of the subsystems before it. ``kind="exact"``
    runs the same IMEX machinery with one joint implicit solve per stage.
    ``jacobian_cache`` (a dict) carries factored stage matrices between
    steps when the Newton config allows reuse.
    """
    if not dt > 0:
        raise ContractViolation(f"time step must be positive, got {dt}")
    kind = PredictorKind.parse(kind)
    ws = StageWorkspace.empty(sys, tableau, kind, sys.split(u_prev), t, dt)
    ws.jacobian_cache = jacobian_cache
    for j in range(tableau.s):
        if kind is PredictorKind.EXACT:
            _solve_exact_stage(j, sys, tableau, ws, newton)
        elif kind.is_jacobi and executor is not None and tableau.a[j, j] != 0.0:
            futures = [executor.submit(solve_implicit_stage, i, j, sys, tableau, kind, ws, newton)
                       for i in range(sys.m)]
            for fut in futures:
                fut.result()
        else:
            for i in range(sys.m):
                solve_implicit_stage(i, j, sys, tableau, kind, ws, newton)
        if kind is PredictorKind.STAGE_VARIANT:
            ws.history.append(np.asarray(sys.coupling(0, ws.u_stage[j], ws.t_impl(j)), dtype=np.float64))
        explicit_stage(j, sys, ws)
    u_new = _combine(ws, sys, tableau)
    return (u_new, ws) if return_workspace else u_new


def step_monolithic(sys: CoupledOdeSystem, tableau: ImexTableau, u_prev, t: float, dt: float,
                    newton: NewtonConfig = DEFAULT_NEWTON, *, return_iterations=False):
    """One step of the implicit (ESDIRK) half of ``tableau`` on the full coupled system."""
    if not dt > 0:
        raise ContractViolation(f"time step must be positive, got {dt}")
    u_prev = np.asarray(u_prev, dtype=np.float64)
    if u_prev.shape != (sys.dim,):
        raise ContractViolation(f"state has shape {u_prev.shape}, system expects ({sys.dim},)")
    K = []
    iters = []
    for j in range(tableau.s):
        t_j = t + tableau.c[j] * dt
        base = u_prev.copy()
        for p in range(j):
            if tableau.a[j, p] != 0.0:
                base += tableau.a[j, p] * K[p]
        ajj = tableau.a[j, j]
        if ajj == 0.0:
            k, it = dt * sys.mass_solve(monolithic_velocity(sys, base, t_j)), 0
        else:
            k, _, it = _monolithic_newton(sys, base, ajj, dt, t_j, newton, j)
        K.append(k)
        iters.append(it)
    u_new = u_prev + sum(bp * kp for bp, kp in zip(tableau.b, K) if bp != 0.0)
    return (u_new, iters) if return_iterations else u_new


def step(sys, tableau, kind, u_prev, t, dt, newton=DEFAULT_NEWTON, *, executor=None, jacobian_cache=None):
    """Dispatch helper: ``"monolithic"`` uses :func:`step_monolithic`, anything else the IMEX path."""
    if kind == "monolithic":
        return step_monolithic(sys, tableau, u_prev, t, dt, newton)
    return step_partitioned(sys, tableau, kind, u_prev, t, dt, newton, executor=executor,
                            jacobian_cache=jacobian_cache)


def step_count(t0: float, t1: float, dt: float) -> int:
    """Number of fixed steps covering ``[t0, t1]``; rejects a final partial step."""
    if not dt > 0:
        raise ContractViolation(f"time step must be positive, got {dt}")
    span = t1 - t0
    if span < 0:
        raise ContractViolation(f"t1 = {t1} precedes t0 = {t0}")
    ratio = span / dt
    n = round(ratio)
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ContractViolation(f"(t1 - t0)/dt = {ratio!r} is not an integer number of steps")
    return int(n)


def integrate(sys: CoupledOdeSystem, tableau: ImexTableau, kind, u0, t0: float, t1: float, dt: float,
              newton: NewtonConfig = DEFAULT_NEWTON, *, executor=None, callback=None) -> Trajectory:
    """Fixed-step integration from ``t0`` to ``t1``.

    Stops early and sets ``diverged`` when the state max-norm exceeds
    ``1e12`` or becomes non-finite. ``callback(n, t, u)`` is called after
    each accepted step.
    """
    n_steps = step_count(t0, t1, dt)
    u = np.array(u0, dtype=np.float64, copy=True)
    times, states, iters = [t0], [u.copy()], []
    diverged = False
    kind_is_mono = kind == "monolithic"
    cache = {} if newton.reuse_jacobian else None
    for n in range(1, n_steps + 1):
        t = t0 + (n - 1) * dt
        try:
            if kind_is_mono:
                u, its = step_monolithic(sys, tableau, u, t, dt, newton, return_iterations=True)
                total = int(sum(its))
            else:
                u, ws = step_partitioned(sys, tableau, kind, u, t, dt, newton, executor=executor,
                                         return_workspace=True, jacobian_cache=cache)
                total = int(ws.newton_iters.sum())
        except (NewtonFailure, NumericFailure, SingularMatrixError, StateValidityError) as exc:
            raise StepFailure(f"step {n} (t = {t:.6g}) failed: {exc}", step=n, cause=exc) from exc
        times.append(t0 + n * dt)
        states.append(u.copy())
        iters.append(total)
        if callback is not None:
            callback(n, times[-1], u)
        if not np.all(np.isfinite(u)) or _norm(u) > DIVERGENCE_THRESHOLD:
            diverged = True
            break
    return Trajectory(times=np.array(times), states=np.array(states),
                      newton_iters=np.array(iters, dtype=int), diverged=diverged)


def observed_slopes(dts, errors):
    """``log2``-style observed orders between consecutive entries of a refinement sequence."""
    out = [math.nan]
    for (d0, e0), (d1, e1) in zip(zip(dts, errors), zip(dts[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and math.isfinite(e0) and math.isfinite(e1):
            out.append(math.log(e0 / e1) / math.log(d0 / d1))
        else:
            out.append(math.nan)
    return out

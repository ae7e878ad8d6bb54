from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from mpimex import ContractViolation, CoupledOdeSystem, StepFailure, Subsystem, builtin_tableau
from mpimex.errors import NewtonFailure
from mpimex.integrator import (NewtonConfig, integrate, observed_slopes, step_count, step_monolithic,
                               step_partitioned)
from mpimex.problems import build_problem
from mpimex.problems.linear3 import linear3_exact
from mpimex.system import monolithic_velocity

KINDS = ["weak-jacobi", "strong-jacobi", "weak-gs", "strong-gs"]


@pytest.mark.parametrize("alpha", [-2.0, 0.0, 0.5, 10.0])
def test_monolithic_backward_euler(alpha):
    sys = build_problem("model2", alpha=alpha).system
    u = step_monolithic(sys, builtin_tableau("imex1"), np.array([1.0, 0.0]), 0.0, 1.0)
    np.testing.assert_allclose(u, [2 / 3, -1 / 3], atol=1e-14)


def test_strong_gs_imex1_model2():
    sys = build_problem("model2", alpha=0.5).system
    u = step_partitioned(sys, builtin_tableau("imex1"), "strong-gs", np.array([1.0, 0.0]), 0.0, 1.0)
    np.testing.assert_allclose(u, [0.5, -0.25], atol=1e-14)


def test_consistency_first_order():
    prob = build_problem("linear3")
    sys = prob.system
    r0 = monolithic_velocity(sys, prob.u0, 0.0)
    defects = []
    dts = [0.1, 0.05, 0.025]
    for dt in dts:
        u = step_monolithic(sys, builtin_tableau("imex2"), prob.u0, 0.0, dt)
        defects.append(np.abs(u - prob.u0 - dt * r0).max())
    assert min(observed_slopes(dts, defects)[1:]) > 1.8


def test_linear3_imex4_matches_exact():
    prob = build_problem("linear3")
    traj = integrate(prob.system, builtin_tableau("imex4"), "monolithic", prob.u0, 0.0, 2.0, 0.01)
    ref = linear3_exact(2.0)
    # relative form: the solution magnitude at t = 2 is about 190
    assert np.abs(traj.final - ref).max() / np.abs(ref).max() < 1e-8


@pytest.mark.parametrize("scheme", ["imex2", "imex3", "imex4"])
@pytest.mark.parametrize("kind", KINDS + ["stage-variant", "exact"])
def test_stage_state_identity(scheme, kind):
    tab = builtin_tableau(scheme)
    prob = build_problem("model2", alpha=0.3)
    sys = prob.system
    _, ws = step_partitioned(sys, tab, kind, prob.u0, 0.0, 0.3, return_workspace=True)
    for j in range(tab.s):
        for i in range(sys.m):
            expect = ws.u_prev[i] + sum(tab.a_hat[j, p] * ws.k_expl[p][i] for p in range(j)) \
                + sum(tab.a[j, p] * ws.k_impl[p][i] for p in range(j + 1))
            np.testing.assert_allclose(ws.u_stage[j][i], expect, atol=1e-12)


def test_first_stage_explicit():
    prob = build_problem("predprey", n=4)
    sys = prob.system
    tab = builtin_tableau("imex3")
    dt = 0.1
    _, ws = step_partitioned(sys, tab, "strong-gs", prob.u0, 0.0, dt, return_workspace=True)
    assert np.all(ws.newton_iters[0] == 0)
    parts = sys.split(prob.u0)
    for i, s in enumerate(sys.subsystems):
        c = sys.coupling(i, parts, 0.0)
        # implicit part evaluated with the weak-consistent predictor at u_prev
        np.testing.assert_allclose(ws.k_impl[0][i], dt * s.mass_solve(s.velocity(parts[i], c, 0.0)), atol=1e-14)


def test_linear_weak_one_newton_iteration():
    prob = build_problem("linear3")
    _, ws = step_partitioned(prob.system, builtin_tableau("imex2"), "weak-jacobi", prob.u0, 0.0, 0.1,
                             return_workspace=True)
    assert np.all(ws.newton_iters[1] == 1)


def _scalar_pair(coupled=True):
    # two nonlinear scalars; coupling switched off gives identical predictors
    def coup(i, parts, t):
        return np.array([parts[1 - i][0] if coupled else 0.0])

    subs = [Subsystem(f"s{k}", 1, 1, lambda u, c, t, k=k: -(k + 1) * u**3 + np.sin(t) + c) for k in range(2)]
    return CoupledOdeSystem(subs, coup)


@pytest.mark.parametrize("kind", KINDS + ["stage-variant"])
def test_zero_coupling_matches_exact(kind):
    sys = _scalar_pair(coupled=False)
    tab = builtin_tableau("imex3")
    u0 = np.array([0.8, -0.4])
    a = step_partitioned(sys, tab, kind, u0, 0.0, 0.2)
    b = step_partitioned(sys, tab, "exact", u0, 0.0, 0.2)
    np.testing.assert_allclose(a, b, atol=1e-14, rtol=0)


def test_zero_velocity_constant():
    sys = CoupledOdeSystem([Subsystem("z", 3, 1, lambda u, c, t: np.zeros(3))], lambda i, p, t: np.zeros(1))
    traj = integrate(sys, builtin_tableau("imex4"), "strong-gs", np.array([1.0, 2, 3]), 0.0, 1.0, 0.25)
    assert np.all(traj.states == [1, 2, 3])


def test_strong_gs_bounded():
    prob = build_problem("model2", alpha=10.0)
    traj = integrate(prob.system, builtin_tableau("imex1"), "strong-gs", prob.u0, 0.0, 1000.0, 10.0)
    assert not traj.diverged
    assert np.abs(traj.states).max() <= 1.0 + 1e-12


def test_weak_jacobi_diverges():
    prob = build_problem("model2", alpha=1.0)
    traj = integrate(prob.system, builtin_tableau("imex1"), "weak-jacobi", prob.u0, 0.0, 1e5, 10.0)
    assert traj.diverged


@pytest.mark.parametrize("scheme", ["imex1", "imex2", "imex3", "imex4"])
@pytest.mark.parametrize("kind", KINDS)
def test_step_is_linear(scheme, kind):
    prob = build_problem("linear3")
    sys = prob.system
    tab = builtin_tableau(scheme)
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(3), rng.standard_normal(3)
    a, b = 0.7, -1.9
    lhs = step_partitioned(sys, tab, kind, a * u + b * v, 0.0, 0.2)
    rhs = a * step_partitioned(sys, tab, kind, u, 0.0, 0.2) + b * step_partitioned(sys, tab, kind, v, 0.0, 0.2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


@pytest.mark.parametrize("kind", ["weak-jacobi", "strong-jacobi"])
def test_concurrent_jacobi_bitwise(kind):
    prob = build_problem("predprey", n=6)
    sys = prob.system
    tab = builtin_tableau("imex3")
    _, serial = step_partitioned(sys, tab, kind, prob.u0, 0.0, 0.1, return_workspace=True)
    with ThreadPoolExecutor(2) as ex:
        _, conc = step_partitioned(sys, tab, kind, prob.u0, 0.0, 0.1, executor=ex, return_workspace=True)
    for j in range(tab.s):
        for i in range(sys.m):
            assert np.array_equal(serial.k_impl[j][i], conc.k_impl[j][i])


@pytest.mark.parametrize("name", ["linear3", "model2"])
@pytest.mark.parametrize("kind", KINDS + ["stage-variant"])
def test_partitioned_close_to_monolithic(name, kind):
    prob = build_problem(name)
    tab = builtin_tableau("imex2")
    dts = [0.1, 0.05, 0.025, 0.0125]
    diffs = [np.abs(step_partitioned(prob.system, tab, kind, prob.u0, 0.0, dt)
                    - step_monolithic(prob.system, tab, prob.u0, 0.0, dt)).max() for dt in dts]
    if max(diffs) <= 1e-14:
        return
    assert min(observed_slopes(dts, diffs)[1:]) >= 1.7


@pytest.mark.parametrize("scheme, p", [("imex1", 1), ("imex2", 2), ("imex3", 3)])
def test_local_truncation_order(scheme, p):
    prob = build_problem("linear3")
    tab = builtin_tableau(scheme)
    dts = [0.1, 0.05, 0.025]
    errs = [np.abs(step_partitioned(prob.system, tab, "strong-gs", prob.u0, 0.0, dt) - linear3_exact(dt)).max()
            for dt in dts]
    assert observed_slopes(dts, errs)[-1] >= p + 1 - 0.3


def test_step_count():
    assert step_count(0.0, 2.0, 0.0125) == 160
    assert step_count(1.0, 1.0, 0.1) == 0
    with pytest.raises(ContractViolation):
        step_count(0.0, 1.0, 0.3)
    with pytest.raises(ContractViolation):
        step_count(0.0, 1.0, 0.0)


def test_newton_failure_identifies_stage():
    sys = CoupledOdeSystem([Subsystem("stiff", 1, 1, lambda u, c, t: -1e3 * u**5 + c)],
                           lambda i, p, t: np.zeros(1))
    cfg = NewtonConfig(max_iter=1, reuse_jacobian=False)
    with pytest.raises(NewtonFailure) as info:
        step_partitioned(sys, builtin_tableau("imex1"), "weak-gs", np.array([3.0]), 0.0, 1.0, cfg)
    assert info.value.subsystem == 0 and info.value.stage == 1
    with pytest.raises(StepFailure):
        integrate(sys, builtin_tableau("imex1"), "weak-gs", np.array([3.0]), 0.0, 1.0, 1.0, cfg)


def test_newton_config_validated():
    with pytest.raises(ContractViolation):
        NewtonConfig(rel_tol=0.0)


def test_times_increasing():
    prob = build_problem("model2")
    traj = integrate(prob.system, builtin_tableau("imex2"), "weak-gs", prob.u0, 0.0, 1.0, 0.125)
    assert np.all(np.diff(traj.times) > 0)
    assert traj.times[-1] == pytest.approx(1.0)

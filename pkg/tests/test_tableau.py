import itertools

import numpy as np
import pytest

from mpimex import ContractViolation, SCHEMES, builtin_tableau, validate_tableau
from mpimex.tableau import order_condition_residuals


def test_imex1_coefficients():
    t = builtin_tableau("imex1")
    np.testing.assert_array_equal(t.a_hat, [[0, 0], [1, 0]])
    np.testing.assert_array_equal(t.b_hat, [1, 0])
    np.testing.assert_array_equal(t.a, [[0, 0], [0, 1]])
    np.testing.assert_array_equal(t.b, [0, 1])


def test_diagonal_values():
    assert builtin_tableau("imex3").a[1, 1] == pytest.approx(0.4358665216, abs=1e-10)
    assert builtin_tableau("imex4").a[1, 1] == 0.25


def test_unknown_scheme_rejected():
    with pytest.raises(ContractViolation):
        builtin_tableau("imex5")


@pytest.mark.parametrize("scheme", SCHEMES)
def test_builtins_validate(scheme):
    rep = validate_tableau(builtin_tableau(scheme))
    assert rep.ok, str(rep)


def test_imex4_stiffly_accurate():
    t = builtin_tableau("imex4")
    assert t.stiffly_accurate
    np.testing.assert_allclose(t.b, t.a[-1], atol=1e-15)


def test_broken_weights_reported():
    t = builtin_tableau("imex1").replace(b=np.array([0.0, 0.5]), stiffly_accurate=False)
    rep = validate_tableau(t)
    assert not rep.ok
    assert any("sum b" in v for v in rep.violations)


def test_upper_entry_reported_with_index():
    a_hat = np.array(builtin_tableau("imex2").a_hat)
    a_hat[0, 1] = 0.3
    rep = validate_tableau(builtin_tableau("imex2").replace(a_hat=a_hat))
    assert any("a_hat[0][1]" in v for v in rep.violations)


def test_arrays_read_only():
    t = builtin_tableau("imex3")
    with pytest.raises(ValueError):
        t.a[1, 1] = 0.0


@pytest.mark.parametrize("scheme", ["imex2", "imex3", "imex4"])
def test_shared_weights(scheme):
    t = builtin_tableau(scheme)
    np.testing.assert_allclose(t.b_hat, t.b, atol=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("part", ["implicit", "explicit"])
def test_bushy_order_conditions(scheme, part):
    res = order_condition_residuals(builtin_tableau(scheme), part)
    assert max(abs(r) for r in res) <= 1e-12


def _ark_conditions(t):
    # numeric additive order conditions, every mix of explicit/implicit coefficients
    A = {"e": np.array(t.a_hat), "i": np.array(t.a)}
    B = {"e": np.array(t.b_hat), "i": np.array(t.b)}
    c = np.array(t.c)
    out = []
    for b in B.values():
        out += [b.sum() - 1, b @ c - 1 / 2, b @ c**2 - 1 / 3]
        for a in A.values():
            out.append(b @ a @ c - 1 / 6)
        if t.order >= 4:
            out.append(b @ c**3 - 1 / 4)
            for a in A.values():
                out += [b @ (c * (a @ c)) - 1 / 8, b @ a @ c**2 - 1 / 12]
            for a1, a2 in itertools.product(A.values(), repeat=2):
                out.append(b @ a1 @ a2 @ c - 1 / 24)
    return np.abs(out)


@pytest.mark.parametrize("scheme", ["imex3", "imex4"])
def test_additive_order_conditions(scheme):
    t = builtin_tableau(scheme)
    np.testing.assert_allclose(t.c, t.c_hat, atol=1e-12)
    assert _ark_conditions(t).max() <= 1e-10

"""Butcher double tableaus for the builtin IMEX Runge-Kutta schemes.

Each scheme pairs an explicit tableau ``(a_hat, b_hat, c_hat)`` with an
explicit-first-stage, singly diagonally implicit tableau ``(a, b, c)``.
Stage indices are 0-based throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ContractViolation

SCHEMES = ("imex1", "imex2", "imex3", "imex4")

_TOL = 1e-12


@dataclass(frozen=True)
class ImexTableau:
    """An s-stage IMEX Runge-Kutta double tableau.

    Arrays are stored read-only so one instance can be shared freely.
    """

    name: str
    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    stiffly_accurate: bool

    def __post_init__(self):
        for attr in ("a_hat", "b_hat", "c_hat", "a", "b", "c"):
            arr = np.array(getattr(self, attr), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def gamma(self) -> float:
        """Implicit diagonal entry of stage 2 (the singly-implicit value)."""
        return float(self.a[1, 1])

    def replace(self, **changes) -> "ImexTableau":
        """Return a copy with some fields swapped (used to build broken tableaus in tests)."""
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ImexTableau(**fields)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "ok" if self.ok else "; ".join(self.violations)


def _frac_matrix(rows):
    return np.array([[float(Fraction(x)) for x in row] for row in rows])


def _imex1():
    # forward-backward Euler
    return ImexTableau(
        name="imex1",
        a_hat=[[0, 0], [1, 0]], b_hat=[1, 0], c_hat=[0, 1],
        a=[[0, 0], [0, 1]], b=[0, 1], c=[0, 1],
        order=1, stiffly_accurate=True,
    )


def _imex2():
    # trapezoidal rule paired with Heun's method
    return ImexTableau(
        name="imex2",
        a_hat=[[0, 0], [1, 0]], b_hat=[0.5, 0.5], c_hat=[0, 1],
        a=[[0, 0], [0.5, 0.5]], b=[0.5, 0.5], c=[0, 1],
        order=2, stiffly_accurate=True,
    )


def _imex3():
    # ARK3(2)4L[2]SA, Kennedy & Carpenter, Appl. Numer. Math. 44 (2003)
    g = Fraction(1767732205903, 4055673282236)
    a = [
        [0, 0, 0, 0],
        [g, g, 0, 0],
        [Fraction(2746238789719, 10658868560708), Fraction(-640167445237, 6845629431997), g, 0],
        [Fraction(1471266399579, 7840856788654), Fraction(-4482444167858, 7529755066697),
         Fraction(11266239266428, 11593286722821), g],
    ]
    a_hat = [
        [0, 0, 0, 0],
        [Fraction(1767732205903, 2027836641118), 0, 0, 0],
        [Fraction(5535828885825, 10492691773637), Fraction(788022342437, 10882634858940), 0, 0],
        [Fraction(6485989280629, 16251701735622), Fraction(-4246266847089, 9704473918619),
         Fraction(10755448449292, 10357097424841), 0],
    ]
    c = [0, float(2 * g), 0.6, 1.0]
    a = _frac_matrix(a)
    return ImexTableau(
        name="imex3",
        a_hat=_frac_matrix(a_hat), b_hat=a[-1].copy(), c_hat=c,
        a=a, b=a[-1].copy(), c=c,
        order=3, stiffly_accurate=True,
    )


def _imex4():
    # ARK4(3)6L[2]SA, Kennedy & Carpenter, Appl. Numer. Math. 44 (2003)
    F = Fraction
    a = [
        [0, 0, 0, 0, 0, 0],
        [F(1, 4), F(1, 4), 0, 0, 0, 0],
        [F(8611, 62500), F(-1743, 31250), F(1, 4), 0, 0, 0],
        [F(5012029, 34652500), F(-654441, 2922500), F(174375, 388108), F(1, 4), 0, 0],
        [F(15267082809, 155376265600), F(-71443401, 120774400), F(730878875, 902184768),
         F(2285395, 8070912), F(1, 4), 0],
        [F(82889, 524892), 0, F(15625, 83664), F(69875, 102672), F(-2260, 8211), F(1, 4)],
    ]
    a_hat = [
        [0, 0, 0, 0, 0, 0],
        [F(1, 2), 0, 0, 0, 0, 0],
        [F(13861, 62500), F(6889, 62500), 0, 0, 0, 0],
        [F(-116923316275, 2393684061468), F(-2731218467317, 15368042101831),
         F(9408046702089, 11113171139209), 0, 0, 0],
        [F(-451086348788, 2902428689909), F(-2682348792572, 7519795681897),
         F(12662868775082, 11960479115383), F(3355817975965, 11060851509271), 0, 0],
        [F(647845179188, 3216320057751), F(73281519250, 8382639484533),
         F(552539513391, 3454668386233), F(3354512671639, 8306763924573), F(4040, 17871), 0],
    ]
    c = [0, 0.5, 83 / 250, 31 / 50, 17 / 20, 1.0]
    a = _frac_matrix(a)
    return ImexTableau(
        name="imex4",
        a_hat=_frac_matrix(a_hat), b_hat=a[-1].copy(), c_hat=c,
        a=a, b=a[-1].copy(), c=c,
        order=4, stiffly_accurate=True,
    )


_BUILDERS = {"imex1": _imex1, "imex2": _imex2, "imex3": _imex3, "imex4": _imex4}
_CACHE: dict[str, ImexTableau] = {}


def builtin_tableau(scheme: str) -> ImexTableau:
    """Return the builtin tableau named ``scheme`` (``imex1`` .. ``imex4``)."""
    try:
        builder = _BUILDERS[scheme]
    except KeyError:
        raise ContractViolation(f"unknown scheme {scheme!r}; expected one of {SCHEMES}") from None
    if scheme not in _CACHE:
        _CACHE[scheme] = builder()
    return _CACHE[scheme]


def validate_tableau(t: ImexTableau) -> ValidationReport:
    """Check the structural invariants of a double tableau.

    Every violation is reported with the offending (0-based) index; an empty
    report means the tableau is well formed.
    """
    rep = ValidationReport()
    v = rep.violations
    s = len(t.b)
    arrays = {"a_hat": t.a_hat, "a": t.a}
    for nm, mat in arrays.items():
        if mat.shape != (s, s):
            v.append(f"{nm} has shape {mat.shape}, expected {(s, s)}")
    for nm, vec in {"b_hat": t.b_hat, "c_hat": t.c_hat, "c": t.c}.items():
        if vec.shape != (s,):
            v.append(f"{nm} has shape {vec.shape}, expected {(s,)}")
    if v:
        return rep

    for name in ("a_hat", "b_hat", "c_hat", "a", "b", "c"):
        if not np.all(np.isfinite(getattr(t, name))):
            v.append(f"{name} has non-finite entries")

    for j in range(s):
        for k in range(j, s):
            if t.a_hat[j, k] != 0.0:
                v.append(f"a_hat[{j}][{k}] = {t.a_hat[j, k]:g} breaks strict lower triangularity")
        for k in range(j + 1, s):
            if t.a[j, k] != 0.0:
                v.append(f"a[{j}][{k}] = {t.a[j, k]:g} breaks lower triangularity")
    if t.a[0, 0] != 0.0:
        v.append(f"a[0][0] = {t.a[0, 0]:g}, first implicit stage must be explicit")

    for j in range(s):
        if abs(t.a_hat[j].sum() - t.c_hat[j]) > _TOL:
            v.append(f"row-sum mismatch: c_hat[{j}] != sum_k a_hat[{j}][k]")
        if abs(t.a[j].sum() - t.c[j]) > _TOL:
            v.append(f"row-sum mismatch: c[{j}] != sum_k a[{j}][k]")
        if not (-_TOL <= t.c[j] <= 1 + _TOL) or not (-_TOL <= t.c_hat[j] <= 1 + _TOL):
            v.append(f"abscissa {j} outside [0, 1]")

    if abs(t.b_hat.sum() - 1.0) > _TOL:
        v.append(f"sum b_hat != 1 (got {t.b_hat.sum():.16g})")
    if abs(t.b.sum() - 1.0) > _TOL:
        v.append(f"sum b != 1 (got {t.b.sum():.16g})")

    if t.stiffly_accurate:
        for k in range(s):
            if abs(t.b[k] - t.a[s - 1, k]) > _TOL:
                v.append(f"stiffly accurate flag set but b[{k}] != a[{s - 1}][{k}]")
    return rep


def order_condition_residuals(t: ImexTableau, part: str = "implicit") -> list[float]:
    """Residuals of the bushy-tree conditions sum(b c^(q-1)) - 1/q for q <= order."""
    b, c = (t.b, t.c) if part == "implicit" else (t.b_hat, t.c_hat)
    return [float(b @ c ** (q - 1) - 1.0 / q) for q in range(1, t.order + 1)]

"""Builtin benchmark problems."""

from ..errors import ContractViolation
from . import linear3, model2, piston, predprey
from .base import Problem
from .euler import physical_flux, roe_flux, roe_flux_1d
from .linear3 import linear3_exact
from .piston import piston_ale_velocity
from .predprey import predprey_rhs

BUILDERS = {
    "linear3": linear3.build,
    "model2": model2.build,
    "predprey": predprey.build,
    "piston": piston.build,
}
PROBLEMS = tuple(BUILDERS)


def build_problem(name, **params) -> Problem:
    """Instantiate a builtin problem, with parameter overrides."""
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ContractViolation(f"unknown problem {name!r}; expected one of {', '.join(PROBLEMS)}") from None
    return builder(**params)


__all__ = ["Problem", "PROBLEMS", "build_problem", "linear3_exact", "predprey_rhs", "piston_ale_velocity",
           "roe_flux", "roe_flux_1d", "physical_flux"]

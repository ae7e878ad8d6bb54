"""Common container for the builtin benchmark problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from ..errors import ContractViolation
from ..system import CoupledOdeSystem


@dataclass(frozen=True)
class Problem:
    """A coupled system with its initial state and error metric.

    ``blocks`` maps an error-block name to the subsystem indices it covers;
    the first block is the primary convergence metric. ``exact(t)`` is set
    for problems with a closed-form solution; the rest are self-referenced.
    ``observables(u)`` returns the named scalars written per step by runs;
    ``model`` is the problem-specific object (grid, operators) behind it.
    """

    name: str
    system: CoupledOdeSystem
    u0: np.ndarray
    t_final: float
    blocks: dict
    t0: float = 0.0
    exact: Optional[Callable] = None
    linear: bool = False
    params: dict = field(default_factory=dict)
    observables: Optional[Callable] = None
    model: Any = None

    def observe(self, u) -> dict:
        """Named scalar summaries of a state, for trajectory output."""
        if self.observables is not None:
            return dict(self.observables(u))
        return {f"norm_{name}": max(float(np.abs(p).max(initial=0.0)) for p in
                                    (self.system.split(u)[i] for i in idx))
                for name, idx in self.blocks.items()}

    @property
    def primary_block(self) -> str:
        return next(iter(self.blocks))

    def block_errors(self, u, ref) -> dict:
        pu, pr = self.system.split(u), self.system.split(ref)
        out = {}
        for name, idx in self.blocks.items():
            out[name] = max(float(np.abs(pu[i] - pr[i]).max(initial=0.0)) for i in idx)
        return out

    def error(self, u, ref) -> float:
        return self.block_errors(u, ref)[self.primary_block]


def merge_params(defaults: dict, overrides: dict, problem: str) -> dict:
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ContractViolation(f"{problem}: unknown parameter(s) {sorted(unknown)}; "
                                f"known: {sorted(defaults)}")
    out = dict(defaults)
    out.update(overrides)
    return out

"""Partitioned IMEX Runge-Kutta time integration of coupled multiphysics ODEs."""

from .errors import (ContractViolation, MeshTanglingError, MpimexError, NewtonFailure, NumericFailure,
                     SingularMatrixError, SingularParameterError, StateValidityError, StepFailure)
from .integrator import (NewtonConfig, Trajectory, integrate, observed_slopes, step, step_monolithic,
                         step_partitioned)
from .predictor import PredictorKind
from .system import CoupledOdeSystem, Subsystem
from .tableau import SCHEMES, ImexTableau, builtin_tableau, validate_tableau

__version__ = "0.1.0"

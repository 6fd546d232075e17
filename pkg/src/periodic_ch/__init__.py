"""Time-periodic Cahn-Hilliard solver with dynamic boundary conditions.

Yosida-regularized singular potentials, an implicit viscous evolution, a
Poincare-map fixed point for periodicity and continuation in eps.
"""

from .domain import CoupledDomain, CoupledField, build_domain, disc_polar_2d, interval_1d
from .errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    NumericFailure,
    PreconditionError,
    ResolventError,
    StepFailure,
)
from .evolution import Evolution, Model, SolverState, StepReport
from .graphs import (
    CompatibilityWitness,
    Cubic,
    Custom,
    Indicator,
    IndicatorPlusCubic,
    Logarithmic,
    MonotoneGraph,
    check_compatibility,
)
from .periodic import (
    Forcing,
    PeriodicProblem,
    PeriodicSolution,
    epsilon_continuation,
    fixed_point_solve,
    poincare_map,
    verify_weak_solution,
)
from .perturbations import CutoffPerturbation, LipschitzPerturbation, Primitive, linear
from .spaces import SpaceOps

__all__ = [
    "build_domain",
    "check_compatibility",
    "CompatibilityWitness",
    "ConfigError",
    "ConsistencyError",
    "CoupledDomain",
    "CoupledField",
    "Cubic",
    "Custom",
    "CutoffPerturbation",
    "disc_polar_2d",
    "DomainError",
    "epsilon_continuation",
    "Evolution",
    "fixed_point_solve",
    "Forcing",
    "Indicator",
    "IndicatorPlusCubic",
    "interval_1d",
    "linear",
    "LipschitzPerturbation",
    "Logarithmic",
    "Model",
    "MonotoneGraph",
    "NumericFailure",
    "PeriodicProblem",
    "PeriodicSolution",
    "poincare_map",
    "PreconditionError",
    "Primitive",
    "ResolventError",
    "SolverState",
    "SpaceOps",
    "StepFailure",
    "StepReport",
    "verify_weak_solution",
]

__version__ = "0.1.0"

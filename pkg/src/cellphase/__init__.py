"""Phase-field cell motility: diffuse-interface solvers, matched asymptotics
and the sharp-interface laws they converge to."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CellPhaseError,
    ConfigurationError,
    DivergenceError,
    DomainError,
    FrontLostError,
    IterationError,
    ResolutionError,
    RootMultiplicityError,
    RootNotFoundError,
    SolvabilityError,
    TopologyError,
)
from .profiles import ProfileTable, build_profile, potential_eval  # noqa: E402

__all__ = [
    "CellPhaseError", "ConfigurationError", "DivergenceError", "DomainError",
    "FrontLostError", "IterationError", "ProfileTable", "ResolutionError",
    "RootMultiplicityError", "RootNotFoundError", "SolvabilityError", "TopologyError",
    "__version__", "build_profile", "potential_eval",
]

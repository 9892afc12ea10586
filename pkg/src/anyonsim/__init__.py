"""Simulation of anyonic teleportation and superdense coding protocols."""

from .algebra import (
    EPS_CHECK,
    EPS_SOLVER,
    FiniteAbelianGroup,
    group_mul,
    is_unitary,
    standard_bicharacter,
)
from .category import FusionRules, SkeletalData
from .errors import (
    AnyonError,
    CapabilityError,
    InconsistentDataError,
    NumericalError,
    PreconditionError,
    StructuralError,
)

__all__ = [
    "EPS_CHECK",
    "EPS_SOLVER",
    "FiniteAbelianGroup",
    "group_mul",
    "is_unitary",
    "standard_bicharacter",
    "FusionRules",
    "SkeletalData",
    "AnyonError",
    "CapabilityError",
    "InconsistentDataError",
    "NumericalError",
    "PreconditionError",
    "StructuralError",
]

"""Exception hierarchy shared by all modules."""


class AnyonError(Exception):
    """Base class for all package errors."""


class StructuralError(AnyonError, ValueError):
    """Malformed input: wrong shapes, missing F-matrices, bad labels."""


class InconsistentDataError(AnyonError):
    """Data that is well-formed but violates a required identity."""


class NumericalError(AnyonError):
    """An iterative routine failed to converge."""


class PreconditionError(AnyonError, ValueError):
    """Operation called with arguments outside its domain (e.g. odd anyon count)."""


class CapabilityError(AnyonError):
    """The theory lacks the structure an operation needs (e.g. no braiding)."""


class ZeroProbabilityOutcome(PreconditionError):
    """A forced measurement outcome has zero probability."""

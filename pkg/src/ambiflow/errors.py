"""Exception hierarchy shared by all ambiflow modules."""


class AmbiflowError(Exception):
    """Base class for library errors."""


class DomainError(AmbiflowError, ValueError):
    """An argument lies outside the domain of the operation."""


class EmptySampleError(AmbiflowError, ValueError):
    pass


class InvalidConstantsError(AmbiflowError, ValueError):
    """ln(C / beta) <= 0, so the concentration bound is vacuous."""


class UnsupportedBranchError(AmbiflowError, ValueError):
    pass


class UninformativeBandError(AmbiflowError, ValueError):
    """The requested radius reaches the admissible bound for an envelope."""


class NotUpstreamError(AmbiflowError):
    """A characteristic reached a state with non-positive flux speed."""


class TraceError(AmbiflowError):
    pass


class LinearityRequiredError(AmbiflowError):
    """The operation is only exact for linear dynamics."""

"""Exception hierarchy shared by all numerical layers."""


class OpdeformError(Exception):
    """Base class for all package errors."""


class DomainError(OpdeformError):
    """Input outside the contract of an operation (bad potential, t <= 0, ...)."""


class PrecisionError(OpdeformError):
    """Working precision too low for the requested computation."""


class ConvergenceError(OpdeformError):
    """An iteration (Newton, fixed point, Neumann series) failed to converge."""


class QuadratureError(OpdeformError):
    """Integrand misbehaved or a rule was used outside its validity."""


class MeshError(OpdeformError):
    """Collocation mesh too coarse, ill-conditioned, or inconsistent."""

"""Extended-precision laboratory for thinning-deformed orthogonal polynomial ensembles.

Layers, bottom-up: precision/quadrature (arbitrary-digit Gauss rules),
series (truncated Taylor calculus), equilibrium (one-cut measure data),
orthopoly (recurrence coefficients and Christoffel-Darboux kernels for
weights sigma_n e^{-nV}), cauchy + modelrhp (six-ray Riemann-Hilbert
solver for the deformed sine kernel and the oscillation amplitude Q),
asymptotics (polylog/Laplace/Szego closed forms and coefficient
predictions), harness (experiments, fits, CLI, reports).
"""

from .errors import (
    ConvergenceError,
    DomainError,
    MeshError,
    OpdeformError,
    PrecisionError,
    QuadratureError,
)
from .precision import DEFAULT_DPS, MIN_DPS, workdps

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "MeshError",
    "OpdeformError",
    "PrecisionError",
    "QuadratureError",
    "DEFAULT_DPS",
    "MIN_DPS",
    "workdps",
    "__version__",
]

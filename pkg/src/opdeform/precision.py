"""Working-precision contract for the extended-precision layer.

Every quantity in this package is an mpmath real (``mpf``) or complex
(``mpc``) number carried at D decimal digits.  D is configurable per
operation, is never allowed below ``MIN_DPS`` = 50, and defaults to
``DEFAULT_DPS`` = 60.  Arithmetic at fixed D is deterministic, and all
produced objects are immutable, so values may be shared freely between
threads; the mpmath context itself is process-global, which is why the
harness parallelizes with processes rather than threads.

The self-validation protocol used throughout the test suite is: re-run an
operation at D + 20 digits and require relative agreement to 10^-(D-10).
"""

from __future__ import annotations

from contextlib import contextmanager

import mpmath
from mpmath import mpf

from .errors import PrecisionError

DEFAULT_DPS = 60
MIN_DPS = 50


def require_dps(dps: int) -> int:
    """Validate a requested working precision (decimal digits)."""
    dps = int(dps)
    if dps < MIN_DPS:
        raise PrecisionError(f"working precision {dps} below the minimum {MIN_DPS} digits")
    return dps


@contextmanager
def workdps(dps: int):
    """Scope the global mpmath precision to ``dps`` decimal digits."""
    dps = require_dps(dps)
    old = mpmath.mp.dps
    mpmath.mp.dps = dps
    try:
        yield mpmath.mp
    finally:
        mpmath.mp.dps = old


def resolution(dps: int, margin: int = 10) -> mpf:
    """10^-(dps - margin), the agreement threshold of the self-validation protocol."""
    return mpf(10) ** (-(dps - margin))

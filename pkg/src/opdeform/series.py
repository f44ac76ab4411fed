"""Truncated power series arithmetic and polynomial helpers (mpf/mpc coefficients).

A series is a plain list [c0, c1, ..., cN] of mpmath numbers meaning
c0 + c1 x + ... + cN x^N + O(x^{N+1}).  All binary operations truncate to
the shorter order.  Reversion and functional composition are the pieces
the rest of the package leans on: Taylor data of the conformal bulk map
and its inverse, the Laplace-method change of variables f(u v(u)) = u^2,
and Laurent data of equilibrium Cauchy transforms all reduce to these.
"""

from __future__ import annotations

import mpmath
from mpmath import mpf

from .errors import DomainError


def polyval(coeffs, x):
    """Evaluate sum(coeffs[k] * x^k) by Horner; coeffs ascending."""
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def polyder(coeffs):
    """Coefficients of the derivative polynomial."""
    return [k * c for k, c in enumerate(coeffs)][1:] or [mpf(0)]


def ser_trim(a, order):
    out = list(a[: order + 1])
    while len(out) <= order:
        out.append(mpf(0))
    return out


def ser_add(a, b):
    n = min(len(a), len(b))
    return [a[k] + b[k] for k in range(n)]


def ser_sub(a, b):
    n = min(len(a), len(b))
    return [a[k] - b[k] for k in range(n)]


def ser_scale(a, c):
    return [c * ak for ak in a]


def ser_mul(a, b, order=None):
    if order is None:
        order = min(len(a), len(b)) - 1
    out = [mpf(0)] * (order + 1)
    for i, ai in enumerate(a):
        if i > order:
            break
        for j, bj in enumerate(b):
            if i + j > order:
                break
            out[i + j] += ai * bj
    return out


def ser_div(a, b, order=None):
    """a / b with b[0] != 0, by forward substitution."""
    if order is None:
        order = min(len(a), len(b)) - 1
    if b[0] == 0:
        raise DomainError("series division by a series vanishing at 0")
    a = ser_trim(a, order)
    b = ser_trim(b, order)
    out = [mpf(0)] * (order + 1)
    for k in range(order + 1):
        s = a[k]
        for j in range(k):
            s -= out[j] * b[k - j]
        out[k] = s / b[0]
    return out


def ser_sqrt(a, order=None):
    """Square root of a series with a[0] > 0 (or nonzero complex)."""
    if order is None:
        order = len(a) - 1
    if a[0] == 0:
        raise DomainError("series sqrt at a zero constant term")
    a = ser_trim(a, order)
    r0 = mpmath.sqrt(a[0])
    out = [r0] + [mpf(0)] * order
    for k in range(1, order + 1):
        s = a[k]
        for j in range(1, k):
            s -= out[j] * out[k - j]
        out[k] = s / (2 * r0)
    return out


def ser_deriv(a):
    return [k * a[k] for k in range(1, len(a))] or [mpf(0)]


def ser_integ(a):
    """Antiderivative with zero constant term."""
    return [mpf(0)] + [a[k] / (k + 1) for k in range(len(a))]


def ser_compose(outer, inner, order=None):
    """outer(inner(x)) as a series; requires inner[0] == 0."""
    if inner[0] != 0:
        raise DomainError("series composition needs inner(0) = 0")
    if order is None:
        order = min(len(outer), len(inner)) - 1
    acc = [mpf(0)] * (order + 1)
    # Horner in the inner series
    for c in reversed(ser_trim(outer, order)):
        acc = ser_mul(acc, inner, order)
        acc[0] += c
    return acc


def ser_revert(a, order=None):
    """Compositional inverse of a with a[0] = 0, a[1] != 0.

    Newton iteration g <- g - (a(g) - x)/a'(g); each sweep at full order is
    cheap at the small orders used here.
    """
    if order is None:
        order = len(a) - 1
    a = ser_trim(a, order)
    if a[0] != 0 or a[1] == 0:
        raise DomainError("series reversion needs a(0)=0 and a'(0) != 0")
    da = ser_trim(ser_deriv(a), order)
    g = [mpf(0), 1 / a[1]] + [mpf(0)] * (order - 1)
    ident = [mpf(0), mpf(1)] + [mpf(0)] * (order - 1)
    for _ in range(order.bit_length() + 2):
        resid = ser_sub(ser_compose(a, g, order), ident)
        g = ser_sub(g, ser_div(resid, ser_compose(da, g, order), order))
    return g


def ser_eval(a, x):
    return polyval(a, x)

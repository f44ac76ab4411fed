"""Gauss-Legendre rules and composite panel quadrature at extended precision.

Rules are built from scratch: the nodes of the m-point rule are the roots
of the degree-m Legendre polynomial, located by Newton iteration started
from the Chebyshev-angle guesses cos(pi*(4k-1)/(4m+2)), and the weights are
w_k = 2 / ((1-x_k^2) P_m'(x_k)^2).  An m-point rule integrates polynomials
up to degree 2m-1 exactly; on analytic integrands the composite error
decays geometrically in m until the precision floor.

Panels are plain (lo, hi) interval pairs.  Geometric refinement toward an
endpoint is the workhorse for square-root and logarithmic endpoint
behavior and for integrands with a small interior analyticity scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mpf

from .errors import ConvergenceError, DomainError, QuadratureError
from .precision import DEFAULT_DPS, require_dps, workdps

_NEWTON_MAX_ITER = 100

_rule_cache: dict[tuple[int, int], "QuadratureRule"] = {}


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights on an interval; immutable, safe to share."""

    nodes: tuple
    weights: tuple
    interval: tuple
    dps: int

    def mapped(self, lo, hi) -> "QuadratureRule":
        """Affinely transplant the rule onto [lo, hi]."""
        (a, b) = self.interval
        lo, hi = mpf(lo), mpf(hi)
        scale = (hi - lo) / (b - a)
        nodes = tuple(lo + (x - a) * scale for x in self.nodes)
        weights = tuple(w * scale for w in self.weights)
        return QuadratureRule(nodes, weights, (lo, hi), self.dps)


def _legendre_pair(m: int, x):
    """(P_m(x), P_{m-1}(x)) by the three-term recurrence."""
    p_prev = mpf(1)
    p = x
    for k in range(1, m):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    return p, p_prev


def legendre_rule(m: int, dps: int = DEFAULT_DPS) -> QuadratureRule:
    """m-point Gauss-Legendre rule on [-1, 1] at dps decimal digits."""
    if m < 1:
        raise DomainError(f"rule size must be >= 1, got {m}")
    dps = require_dps(dps)
    key = (m, dps)
    cached = _rule_cache.get(key)
    if cached is not None:
        return cached

    with workdps(dps + 15):
        if m == 1:
            nodes, weights = (mpf(0),), (mpf(2),)
        else:
            tol = mpf(10) ** (-(dps + 8))
            half = []
            # roots come in +/- pairs; resolve only the positive half
            for k in range(1, m // 2 + 1):
                x = mpmath.cos(mpmath.pi * (4 * k - 1) / (4 * m + 2))
                for it in range(_NEWTON_MAX_ITER):
                    p, p_prev = _legendre_pair(m, x)
                    dp = m * (x * p - p_prev) / (x * x - 1)
                    dx = p / dp
                    x = x - dx
                    if abs(dx) < tol:
                        break
                else:
                    raise ConvergenceError(
                        f"Legendre Newton did not converge for m={m}, root #{k} "
                        f"after {_NEWTON_MAX_ITER} iterations"
                    )
                p, p_prev = _legendre_pair(m, x)
                dp = m * (x * p - p_prev) / (x * x - 1)
                half.append((x, 2 / ((1 - x * x) * dp * dp)))
            xs = [-x for (x, _) in half]
            ws = [w for (_, w) in half]
            if m % 2 == 1:
                _, p_prev = _legendre_pair(m, mpf(0))
                dp = m * (-p_prev) / (-1)
                xs.append(mpf(0))
                ws.append(2 / (dp * dp))
            xs.extend(x for (x, _) in reversed(half))
            ws.extend(w for (_, w) in reversed(half))
            nodes, weights = tuple(xs), tuple(ws)

    with workdps(dps):
        nodes = tuple(+x for x in nodes)
        weights = tuple(+w for w in weights)
    rule = QuadratureRule(nodes, weights, (mpf(-1), mpf(1)), dps)
    _rule_cache[key] = rule
    return rule


def panel_nodes_weights(panels, m: int, dps: int = DEFAULT_DPS):
    """Flatten mapped Gauss rules over a panel list into node/weight tuples."""
    base = legendre_rule(m, dps)
    nodes, weights = [], []
    for (lo, hi) in panels:
        r = base.mapped(lo, hi)
        nodes.extend(r.nodes)
        weights.extend(r.weights)
    return tuple(nodes), tuple(weights)


def composite_quad(f, panels, m: int = 40, dps: int = DEFAULT_DPS):
    """Sum of mapped m-point Gauss rules of ``f`` over ``panels``.

    Deterministic for fixed inputs.  A non-finite integrand value raises
    QuadratureError naming the offending node.
    """
    dps = require_dps(dps)
    with workdps(dps):
        nodes, weights = panel_nodes_weights(panels, m, dps)
        total = mpf(0)
        for x, w in zip(nodes, weights):
            fx = f(x)
            if not mpmath.isfinite(fx):
                raise QuadratureError(f"integrand not finite at node x={mpmath.nstr(x, 17)}")
            total += w * fx
        return total


def uniform_panels(lo, hi, count: int):
    """``count`` equal panels on [lo, hi]."""
    lo, hi = mpf(lo), mpf(hi)
    if count < 1:
        raise DomainError("panel count must be >= 1")
    step = (hi - lo) / count
    return [(lo + k * step, lo + (k + 1) * step) for k in range(count)]


def geometric_panels(lo, hi, toward, min_width, ratio=3):
    """Panels on [lo, hi] shrinking geometrically toward endpoint ``toward``.

    Widths decrease by ``ratio`` down to ``min_width``; the innermost panel
    touches ``toward``.  Used for log/sqrt endpoint behavior: the error of a
    fixed-order Gauss rule is then uniform over the levels.
    """
    lo, hi, min_width = mpf(lo), mpf(hi), mpf(min_width)
    length = hi - lo
    if length <= 0:
        raise DomainError("empty panel interval")
    if min_width >= length:
        return [(lo, hi)]
    ratio = mpf(ratio)
    cuts = []
    w = length
    while w > min_width:
        w = w / ratio
        cuts.append(w)
    if toward == "lo" or toward == lo:
        pts = [lo] + [lo + c for c in reversed(cuts)] + [hi]
    elif toward == "hi" or toward == hi:
        pts = [lo] + [hi - c for c in cuts] + [hi]
    else:
        raise DomainError(f"refinement endpoint {toward!r} not on the interval")
    return list(zip(pts[:-1], pts[1:]))


def refined_panels(lo, hi, points, min_width, ratio=3):
    """Split [lo, hi] with geometric refinement toward each interior point."""
    lo, hi = mpf(lo), mpf(hi)
    pts = sorted(mpf(p) for p in points if lo < mpf(p) < hi)
    if not pts:
        return [(lo, hi)]
    panels = []
    left = lo
    for i, p in enumerate(pts):
        right = (p + pts[i + 1]) / 2 if i + 1 < len(pts) else hi
        panels.extend(geometric_panels(left, p, "hi", min_width, ratio))
        panels.extend(geometric_panels(p, right, "lo", min_width, ratio))
        left = right
    return panels

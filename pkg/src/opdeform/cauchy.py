"""Cauchy transforms of Chebyshev interpolants on a segment.

For a density f on [-1, 1] expanded as f = sum_k a_k T_k, the Cauchy
transform (1/2(pi)i) int f(x)/(x - z) dx is sum_k a_k I_k(z) with

    I_0(z) = (1/2(pi)i) Log((z-1)/(z+1)),        I_1 = z I_0 + 1/((pi)i),
    I_{k+1} = 2 z I_k - I_{k-1} + tau_k/((pi)i),  tau_k = int T_k,

the branch cut of the Log ratio being exactly the segment.  Three regimes:

  * boundary values on (-1, 1): the recurrence is neutrally stable
    (homogeneous solutions are unimodular), sides differ by +-(i pi) in I_0;
  * nearby exterior points (Bernstein parameter rho(z) below RHO_SPLIT):
    forward recurrence, losing at most rho^M of the working precision;
  * well-separated points: plain Gauss quadrature of T_k(x)/(x-z), whose
    pole is far in the Bernstein sense.

Affine images of the segment reduce to this case exactly: the Cauchy
kernel is invariant under simultaneous affine maps of source and target.
"""

from __future__ import annotations

import mpmath
from mpmath import mpc, mpf

from .errors import DomainError
from .precision import DEFAULT_DPS, workdps
from .quadrature import legendre_rule

RHO_SPLIT = mpf("1.9")

_table_cache: dict[tuple[int, int], "ChebCauchyTable"] = {}


def cheb_nodes(M: int):
    """First-kind Chebyshev points, descending: cos((2l+1) pi / (2M))."""
    return [mpmath.cos(mpmath.pi * (2 * l + 1) / (2 * M)) for l in range(M)]


def cheb_coeff_matrix(M: int):
    """W with a = W f: discrete orthogonality at first-kind points."""
    W = []
    for k in range(M):
        scale = (mpf(1) if k == 0 else mpf(2)) / M
        W.append([scale * mpmath.cos(k * mpmath.pi * (2 * l + 1) / (2 * M)) for l in range(M)])
    return W


def clenshaw(coeffs, x):
    b1 = b2 = mpf(0)
    for c in reversed(coeffs[1:]):
        b1, b2 = 2 * x * b1 - b2 + c, b1
    return x * b1 - b2 + coeffs[0]


def tau_integrals(M: int):
    """tau_k = int_{-1}^{1} T_k(x) dx."""
    out = []
    for k in range(M):
        if k % 2 == 1:
            out.append(mpf(0))
        else:
            out.append(mpf(2) / (1 - k * k))
    return out


def bernstein_rho(z) -> mpf:
    """|z + sqrt(z^2-1)| with the branch making it >= 1; = 1 on the segment."""
    z = mpc(z)
    w = mpmath.sqrt(z - 1) * mpmath.sqrt(z + 1)
    r = abs(z + w)
    if r < 1:
        r = abs(z - w)
    return max(r, mpf(1))


class ChebCauchyTable:
    """Cached per (M, dps): nodes, coefficient transform, quadrature fallback."""

    def __init__(self, M: int, dps: int = DEFAULT_DPS):
        self.M = M
        self.dps = dps
        with workdps(dps):
            self.nodes = cheb_nodes(M)
            self.W = cheb_coeff_matrix(M)
            self.tau = tau_integrals(M)
            rule = legendre_rule(M + 96, dps)
            self.qx = rule.nodes
            self.qw = rule.weights
            # T_k at quadrature nodes (k-major)
            self.Tq = []
            prev = [mpf(1)] * len(self.qx)
            cur = list(self.qx)
            self.Tq.append(prev)
            if M > 1:
                self.Tq.append(cur)
            for _k in range(2, M):
                nxt = [2 * x * c - p for x, c, p in zip(self.qx, cur, prev)]
                self.Tq.append(nxt)
                prev, cur = cur, nxt

    def coeffs_from_values(self, vals):
        return [mpmath.fdot(row, vals) for row in self.W]

    def cauchy_basis(self, z, side=None):
        """[I_0(z), ..., I_{M-1}(z)]; ``side`` +1/-1 selects a boundary value."""
        M = self.M
        with workdps(self.dps):
            z = mpc(z)
            if side is not None:
                x = z.real
                if not (-1 < x < 1) or z.imag != 0:
                    raise DomainError("sided Cauchy values need a point inside the open segment")
                base = mpmath.log((1 - x) / (1 + x))
                I0 = (base + side * mpmath.pi * 1j) / (2j * mpmath.pi)
                return self._forward(mpc(x), I0)
            rho = bernstein_rho(z)
            if rho <= RHO_SPLIT:
                I0 = mpmath.log((z - 1) / (z + 1)) / (2j * mpmath.pi)
                return self._forward(z, I0)
            return self._by_quadrature(z)

    def _forward(self, z, I0):
        M = self.M
        out = [I0]
        if M == 1:
            return out
        inv_pi_i = 1 / (1j * mpmath.pi)
        out.append(z * I0 + inv_pi_i)
        for k in range(1, M - 1):
            out.append(2 * z * out[-1] - out[-2] + self.tau[k] * inv_pi_i)
        return out

    def _by_quadrature(self, z):
        v = [w / (x - z) for w, x in zip(self.qw, self.qx)]
        pref = 1 / (2j * mpmath.pi)
        return [pref * mpmath.fdot(Tk, v) for Tk in self.Tq]


def cheb_cauchy_table(M: int, dps: int = DEFAULT_DPS) -> ChebCauchyTable:
    key = (M, dps)
    tab = _table_cache.get(key)
    if tab is None:
        tab = ChebCauchyTable(M, dps)
        _table_cache[key] = tab
    return tab

"""One-cut equilibrium problem for polynomial confining potentials.

For an even-degree V with positive leading coefficient, the equilibrium
density on its support [a, b] has the square-root form

    phi_V(x) = (1/pi) * sqrt((b-x)(x-a)) * q(x),

where q is the polynomial part of V'(z) / (2 sqrt((z-a)(z-b))) at infinity.
The endpoints are pinned by requiring the Cauchy transform to behave like
-1/z: writing V'(z)/(2 R(z)) = q(z) + c1/z + c2/z^2 + ..., the two moment
conditions are c1 = 0 and c2 = 1.  We solve them by a damped Newton
iteration with an analytic Jacobian obtained from the same Laurent series.

The derived data bundled in EquilibriumData:
  * ell   - the variational constant in 2 U(x) + V(x) = ell on [a, b],
  * kappa - pi times the measure of [0, b], the phase that drives the
            cos(2 n kappa) oscillations downstream,
  * logarithmic potential / residual evaluators, and the edge functions
    used to bound effective-potential decay off the support,
  * the Taylor data at the origin of the conformal bulk map
    phi0(x) = integral_0^x pi*phi_V, together with its series inverse.

All evaluators are pure; EquilibriumData is immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
from mpmath import mpf

from .errors import ConvergenceError, DomainError
from .precision import DEFAULT_DPS, require_dps, workdps
from .quadrature import (
    composite_quad,
    geometric_panels,
    uniform_panels,
)
from .series import (
    polyval,
    ser_integ,
    ser_mul,
    ser_revert,
    ser_sqrt,
    ser_trim,
)

_NEWTON_MAX_ITER = 80
_REGULARITY_SAMPLES = 1000


@dataclass(frozen=True)
class PotentialSpec:
    """Polynomial potential, coefficients ascending in degree."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(mpf(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        deg = self.degree
        if deg < 2 or deg % 2 != 0:
            raise DomainError(f"potential must have even degree >= 2, got degree {deg}")
        if coeffs[-1] <= 0:
            raise DomainError("potential must have positive leading coefficient")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return polyval(self.coeffs, x)

    def deriv(self, x):
        acc = mpf(0)
        for k in range(self.degree, 0, -1):
            acc = acc * x + k * self.coeffs[k]
        return acc

    @property
    def is_even(self) -> bool:
        return all(c == 0 for c in self.coeffs[1::2])


def _laurent_tail(V: PotentialSpec, a, b, order):
    """Series T(w) = ((1-aw)(1-bw))^(-1/2) and its a/b derivatives."""
    one_minus_aw = ser_trim([mpf(1), -a], order)
    one_minus_bw = ser_trim([mpf(1), -b], order)
    T = ser_sqrt(ser_mul(one_minus_aw, one_minus_bw, order), order)
    T = _ser_reciprocal(T, order)
    # d/da log T = (w/2)/(1-aw)  =>  dT/da = T * (w/2) * sum a^k w^k
    geo_a = [a**k for k in range(order + 1)]
    geo_b = [b**k for k in range(order + 1)]
    half_w = [mpf(0), mpf(1) / 2]
    dTda = ser_mul(T, ser_mul(half_w, geo_a, order), order)
    dTdb = ser_mul(T, ser_mul(half_w, geo_b, order), order)
    return T, dTda, dTdb


def _ser_reciprocal(s, order):
    out = [mpf(0)] * (order + 1)
    out[0] = 1 / s[0]
    for k in range(1, order + 1):
        acc = mpf(0)
        for j in range(1, k + 1):
            acc += s[j] * out[k - j]
        out[k] = -acc / s[0]
    return out


def _moment_conditions(V: PotentialSpec, a, b):
    """(c1, c2, q_coeffs, Jacobian of (c1,c2) in (a,b))."""
    d = V.degree
    T, dTda, dTdb = _laurent_tail(V, a, b, d)
    half_vprime = [k * V.coeffs[k] / 2 for k in range(1, d + 1)]  # index k-1 holds k v_k/2

    def contract(series, shift):
        acc = mpf(0)
        for k in range(1, d + 1):
            idx = k - shift
            if 0 <= idx <= d:
                acc += half_vprime[k - 1] * series[idx]
        return acc

    c1 = contract(T, 1)
    c2 = contract(T, 0)
    jac = ((contract(dTda, 1), contract(dTdb, 1)), (contract(dTda, 0), contract(dTdb, 0)))
    q_coeffs = []
    for j in range(d - 1):
        acc = mpf(0)
        for k in range(j + 2, d + 1):
            acc += half_vprime[k - 1] * T[k - j - 2]
        q_coeffs.append(acc)
    return c1, c2, tuple(q_coeffs), jac


def _initial_endpoints(V: PotentialSpec):
    v2 = V.coeffs[2] if V.degree >= 2 else mpf(0)
    v1 = V.coeffs[1]
    if v2 > 0:
        center = -v1 / (2 * v2)
        radius = mpmath.sqrt(2 / v2)
    else:
        center = mpf(0)
        radius = (2 / V.coeffs[-1]) ** (mpf(1) / V.degree) + 1
    return center - radius, center + radius


@dataclass(frozen=True)
class EquilibriumData:
    """Immutable equilibrium-measure data; all evaluators are pure."""

    potential: PotentialSpec
    a: mpf
    b: mpf
    q_coeffs: tuple
    ell: mpf
    kappa: mpf
    phiV0: mpf
    dps: int
    mass_residual: mpf

    @property
    def center(self):
        return (self.a + self.b) / 2

    @property
    def radius(self):
        return (self.b - self.a) / 2

    def q(self, x):
        return polyval(self.q_coeffs, x)

    def phi_V(self, x):
        """Equilibrium density; zero off [a, b]."""
        with workdps(self.dps):
            x = mpf(x)
            if x <= self.a or x >= self.b:
                return mpf(0)
            return mpmath.sqrt((self.b - x) * (x - self.a)) * self.q(x) / mpmath.pi

    def _theta_density(self, theta):
        # pull-back of pi*phi_V dx under x = center + radius*cos(theta)
        x = self.center + self.radius * mpmath.cos(theta)
        s = mpmath.sin(theta)
        return self.radius**2 * s * s * self.q(x)

    def log_potential(self, x):
        """U(x) = -integral log|x-y| dmu(y) by singularity-refined quadrature."""
        with workdps(self.dps + 10):
            x = mpf(x)
            c, r = self.center, self.radius
            sing = []
            u = (x - c) / r
            if abs(u) < 1:
                sing.append(mpmath.acos(u))
            tiny = mpf(10) ** (-(self.dps + 10))
            panels = _panels_refined_everywhere(mpf(0), +mpmath.pi, sing, tiny)

            def f(theta):
                d = abs(x - c - r * mpmath.cos(theta))
                if d == 0:
                    return mpf(0)
                return mpmath.log(d) * self._theta_density(theta) / mpmath.pi

            val = composite_quad(f, panels, m=45, dps=self.dps + 10)
        with workdps(self.dps):
            return +(-val)

    def el_residual(self, x):
        """2 U(x) + V(x) - ell: zero on [a, b], strictly positive outside."""
        with workdps(self.dps):
            return 2 * self.log_potential(x) + self.potential(mpf(x)) - self.ell

    def edge_gap(self, x):
        """Effective-potential gap off the support via the edge integrals.

        Equals el_residual for x outside [a, b] but is computed from the
        smooth path integral of sqrt((t-a)(t-b)) q(t), so it is cheap and
        spectrally accurate; used for quadrature-window placement.
        """
        with workdps(self.dps):
            x = mpf(x)
            if self.a <= x <= self.b:
                return mpf(0)
            if x > self.b:
                lo, flip = self.b, False
                umax = mpmath.sqrt(x - self.b)
            else:
                lo, flip = self.a, True
                umax = mpmath.sqrt(self.a - x)

            def f(u):
                # u^2 = |t - near endpoint| absorbs one square-root factor
                t = lo - u * u if flip else lo + u * u
                far = self.a if not flip else self.b
                return 2 * u * u * mpmath.sqrt(abs(t - far)) * self.q(t)

            val = composite_quad(f, uniform_panels(0, umax, 8), m=30, dps=self.dps)
            return 2 * val

    def phi0_series(self, order: int):
        """Taylor coefficients at 0 of phi0(x) = integral_0^x pi*phi_V."""
        with workdps(self.dps):
            sb = ser_sqrt(ser_trim([self.b, mpf(-1)], order), order)  # sqrt(b-x)
            sa = ser_sqrt(ser_trim([-self.a, mpf(1)], order), order)  # sqrt(x-a)
            density = ser_mul(ser_mul(sb, sa, order), ser_trim(list(self.q_coeffs), order), order)
            return ser_trim(ser_integ(density), order + 1)

    def phi0_inverse_series(self, order: int):
        with workdps(self.dps):
            return ser_revert(self.phi0_series(order), order)


def _panels_refined_everywhere(lo, hi, interior_points, min_width):
    """Split [lo, hi] at interior singular points, refining toward every cut."""
    pts = sorted(p for p in interior_points if lo < p < hi)
    edges = [lo] + pts + [hi]
    panels = []
    for left, right in zip(edges[:-1], edges[1:]):
        mid = (left + right) / 2
        panels.extend(geometric_panels(left, mid, "lo", min_width))
        panels.extend(geometric_panels(mid, right, "hi", min_width))
    return panels


def solve_equilibrium(V: PotentialSpec, dps: int = DEFAULT_DPS) -> EquilibriumData:
    """Endpoints, density, variational constant and phase for the potential."""
    dps = require_dps(dps)
    with workdps(dps + 15):
        a, b = _initial_endpoints(V)
        tol = mpf(10) ** (-(dps + 5))
        for _ in range(_NEWTON_MAX_ITER):
            c1, c2, q_coeffs, jac = _moment_conditions(V, a, b)
            r1, r2 = c1, c2 - 1
            norm = max(abs(r1), abs(r2))
            if norm < tol:
                break
            (j11, j12), (j21, j22) = jac
            det = j11 * j22 - j12 * j21
            if det == 0:
                raise ConvergenceError("singular Jacobian in the endpoint solve")
            da = (r1 * j22 - r2 * j12) / det
            db = (j11 * r2 - j21 * r1) / det
            step = mpf(1)
            for _ in range(40):
                na, nb = a - step * da, b - step * db
                if nb > na:
                    n1, n2, _, _ = _moment_conditions(V, na, nb)
                    if max(abs(n1), abs(n2 - 1)) < norm:
                        break
                step /= 2
            a, b = a - step * da, b - step * db
        else:
            raise ConvergenceError(
                f"endpoint Newton stalled at residual {mpmath.nstr(norm, 5)}"
            )

        if not (a < 0 < b):
            raise DomainError(
                f"origin is not an interior bulk point: support is [{mpmath.nstr(a, 8)}, {mpmath.nstr(b, 8)}]"
            )
        _check_one_cut_regular(q_coeffs, a, b)

        center, radius = (a + b) / 2, (b - a) / 2
        qpoly = list(q_coeffs)

        def theta_density(theta):
            x = center + radius * mpmath.cos(theta)
            s = mpmath.sin(theta)
            return radius**2 * s * s * polyval(qpoly, x)

        bulk_m = max(24, (V.degree + 6))
        mass = composite_quad(
            lambda t: theta_density(t) / mpmath.pi, uniform_panels(0, mpmath.pi, 8), m=bulk_m, dps=dps + 15
        )
        mass_residual = mass - 1

        theta0 = mpmath.acos(-center / radius)
        kappa = composite_quad(theta_density, uniform_panels(0, theta0, 8), m=bulk_m, dps=dps + 15)

        # ell from the complexified potential at X = center + 2*radius:
        # ell = 2 U(X) + V(X) - 2 * integral_b^X sqrt((t-a)(t-b)) q(t) dt
        n_moments = int((dps + 20) * mpmath.log(10) / mpmath.log(2)) + 10
        panels = uniform_panels(0, mpmath.pi, 8 + n_moments // 24)
        mrule_m = 40
        from .quadrature import panel_nodes_weights

        nodes, weights = panel_nodes_weights(panels, mrule_m, dps + 15)
        dens_vals = [theta_density(t) / mpmath.pi for t in nodes]
        cosr = [radius * mpmath.cos(t) for t in nodes]
        moments = []
        powers = [mpf(1)] * len(nodes)
        for _k in range(1, n_moments + 1):
            powers = [p * cv for p, cv in zip(powers, cosr)]
            moments.append(sum(w * d * p for w, d, p in zip(weights, dens_vals, powers)))

        X = center + 2 * radius
        log_term = mpmath.log(X - center)
        series_sum = mpf(0)
        for k in range(n_moments, 0, -1):
            series_sum += moments[k - 1] / (k * (X - center) ** k)
        U_X = -log_term + series_sum

        umax = mpmath.sqrt(X - b)

        def edge_f(u):
            t = b + u * u
            return 2 * u * u * mpmath.sqrt(t - a) * polyval(qpoly, t)

        phib_X = composite_quad(edge_f, uniform_panels(0, umax, 8), m=40, dps=dps + 15)
        ell = 2 * U_X + V(X) - 2 * phib_X

        phiV0 = mpmath.sqrt((b - mpf(0)) * (mpf(0) - a)) * polyval(qpoly, mpf(0)) / mpmath.pi

    with workdps(dps):
        return EquilibriumData(
            potential=V,
            a=+a,
            b=+b,
            q_coeffs=tuple(+c for c in q_coeffs),
            ell=+ell,
            kappa=+kappa,
            phiV0=+phiV0,
            dps=dps,
            mass_residual=+mass_residual,
        )


def _check_one_cut_regular(q_coeffs, a, b):
    qpoly = list(q_coeffs)
    step = (b - a) / (_REGULARITY_SAMPLES - 1)
    for i in range(_REGULARITY_SAMPLES):
        x = a + i * step
        if polyval(qpoly, x) <= 0:
            raise DomainError(
                f"not one-cut regular: q({mpmath.nstr(x, 8)}) <= 0 on the support"
            )


def effective_params(eq: EquilibriumData, t):
    """Bulk coupling constants (T, u) for deformation curvature t > 0."""
    with workdps(eq.dps):
        t = mpf(t)
        if t <= 0:
            raise DomainError(f"deformation curvature must be positive, got {mpmath.nstr(t, 8)}")
        T = mpmath.pi * eq.phiV0 / mpmath.sqrt(t)
        return T, 1 / (T * T)

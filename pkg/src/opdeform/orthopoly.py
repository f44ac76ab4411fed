"""Recurrence coefficients and Christoffel-Darboux kernels for thinned weights.

The weight is w_n(x) = sigma_n(x) exp(-n V(x)) with the Fermi-type factor

    sigma_n(x) = 1 / (1 + exp(-s - n^2 Q(x))),

which transitions on the bulk scale 1/n near the origin; s = +inf (the
GROUND sentinel) switches the factor off exactly.

Recurrence coefficients are produced by a discretized Stieltjes procedure:
the inner product is replaced by a composite Gauss discretization and the
multiplication operator is tridiagonalized by a Lanczos iteration with full
reorthogonalization.  Vectors carry p_k(x_i) * sqrt(weight), so every
stored quantity is O(1) and the working precision does not need to grow
with n.  The discretization is exact for the needed polynomial degrees by
construction:

  * on the support the integrand is transplanted by x = c + r cos(theta),
    making p_j p_k a trigonometric polynomial of degree <= 2K that uniform
    theta panels resolve;
  * near the origin the panels refine geometrically down to width 1e-2/n
    to resolve the sigma_n transition;
  * beyond the support the panels follow the effective-potential decay
    exponent in fixed-size increments, so each panel sees a bounded
    dynamic range, out to where n * (2U + V - ell) exceeds
    (D + guard) ln 10.

Kernels are evaluated through the Christoffel-Darboux identity with the
orthonormal three-term recurrence, the sqrt-weight prefactor being applied
in log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
from mpmath import mpf

from .equilibrium import EquilibriumData, PotentialSpec, solve_equilibrium
from .errors import DomainError, PrecisionError, QuadratureError
from .precision import DEFAULT_DPS, require_dps, workdps
from .quadrature import geometric_panels, legendre_rule, uniform_panels
from .series import polyval

#: Explicit ground-process sentinel: sigma_n == 1 (deformation switched off).
GROUND = None

_MAX_DEGREE = 4096


@dataclass(frozen=True)
class DeformationSpec:
    """Deformation profile Q (polynomial, ascending coeffs) and strength s."""

    q_def_coeffs: tuple
    s: mpf

    def __post_init__(self):
        coeffs = tuple(mpf(c) for c in self.q_def_coeffs)
        object.__setattr__(self, "q_def_coeffs", coeffs)
        object.__setattr__(self, "s", mpf(self.s))
        if len(coeffs) < 3 or coeffs[0] != 0 or coeffs[1] != 0:
            raise DomainError("deformation profile needs Q(0) = Q'(0) = 0")
        if coeffs[2] <= 0:
            raise DomainError("deformation curvature t = Q''(0)/2 must be positive")

    @property
    def t(self):
        return self.q_def_coeffs[2]

    def Q(self, x):
        return polyval(self.q_def_coeffs, x)

    def check_positive(self, lo, hi, samples: int = 400):
        """Q > 0 away from the origin on [lo, hi] (sampled)."""
        lo, hi = mpf(lo), mpf(hi)
        step = (hi - lo) / samples
        for i in range(samples + 1):
            x = lo + i * step
            if abs(x) > step / 2 and self.Q(x) <= 0:
                raise DomainError(
                    f"deformation profile not positive away from 0: Q({mpmath.nstr(x, 8)}) <= 0"
                )


@dataclass(frozen=True)
class EnsembleSpec:
    """Potential + deformation (or GROUND) + particle number."""

    V: PotentialSpec
    deformation: DeformationSpec | None
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("ensemble size n must be >= 1")

    @property
    def is_ground(self) -> bool:
        return self.deformation is GROUND or (
            self.deformation is not None and mpmath.isinf(self.deformation.s)
        )


def log_weight(spec: EnsembleSpec, x):
    """log of the weight: log sigma_n(x) - n V(x), overflow-safe in both tails."""
    x = mpf(x)
    val = -spec.n * spec.V(x)
    if spec.is_ground:
        return val
    d = spec.deformation
    r = d.s + spec.n**2 * d.Q(x)
    # log sigma = -log(1+e^-r) for r >= 0;  = r - log(1+e^r) for r < 0
    if r >= 0:
        return val - mpmath.log(1 + mpmath.exp(-r))
    return val + r - mpmath.log(1 + mpmath.exp(r))


def quadrature_window(eq: EquilibriumData, n: int, dps: int, guard: int = 25):
    """[x-, x+] outside of which n*(2U + V - ell) exceeds (dps+guard)*ln 10."""
    with workdps(eq.dps):
        tau = (dps + guard) * mpmath.log(10)

        def edge(direction):
            lo = eq.b if direction > 0 else eq.a
            width = (eq.b - eq.a) / 2
            hi = lo + direction * width
            while n * eq.edge_gap(hi) < tau:
                width *= 2
                hi = lo + direction * width
            wlo = lo
            for _ in range(40):
                mid = (wlo + hi) / 2
                if n * eq.edge_gap(mid) < tau:
                    wlo = mid
                else:
                    hi = mid
                if abs(hi - wlo) < mpf("1e-3") * (abs(hi) + 1):
                    break
            return hi

        return edge(-1), edge(+1)


@dataclass(frozen=True)
class Discretization:
    """Flattened composite rule approximating the weighted inner product."""

    nodes: tuple
    weights: tuple
    window: tuple
    bulk_panels: int
    bulk_points: int
    tail_panels: int

    @property
    def size(self) -> int:
        return len(self.nodes)


def build_discretization(
    spec: EnsembleSpec,
    eq: EquilibriumData,
    K: int,
    dps: int,
    guard: int = 25,
    point_factor: float = 1.0,
) -> Discretization:
    """Nodes/weights resolving all integrands p_j p_k w_n with j, k <= K.

    ``point_factor`` scales the per-panel order; an independent rule for
    cross-checks is obtained with a different factor.
    """
    with workdps(dps):
        xlo, xhi = quadrature_window(eq, spec.n, dps, guard)
        c, r = eq.center, eq.radius
        pi = +mpmath.pi

        # peak local wavenumber (per unit polynomial degree) of the
        # transplanted oscillation: max_theta pi*phi_V(x(theta)) r sin(theta)
        freq = max(
            mpmath.pi * eq.phi_V(c + r * mpmath.cos(pi * i / 64)) * r * mpmath.sin(pi * i / 64)
            for i in range(1, 64)
        )

        # ---- bulk: theta panels on [0, pi] -------------------------------
        n_bulk_panels = 8
        base_panels = uniform_panels(mpf(0), pi, n_bulk_panels)
        analytic_m = 0 if spec.is_ground else int(0.78 * (dps + 8))
        theta_panels = base_panels

        if not spec.is_ground:
            # The factor 1 - sigma_n = O(e^{-s - n^2 Q}) must be resolved out
            # to where n^2 Q(x) exhausts the precision budget.  Inside that
            # range, panel edges follow fixed increments of n^2 Q (bounded
            # dynamic range per panel); a geometric cascade down to width
            # 1e-2/n resolves the transition scale itself.
            defo = spec.deformation
            nn2 = mpf(spec.n) ** 2
            m_sigma = max(int((0.45 * dps + 16) * point_factor), analytic_m)
            delta = mpf(2 * m_sigma) / 3
            budget = (dps + guard) * mpmath.log(10) - min(defo.s, mpf(0))

            def sigma_edge(direction, target):
                # |x| with n^2 Q(x) = target on the given side, clipped to the bulk
                clip = (eq.b - mpf("0.04") * (eq.b - eq.a)) if direction > 0 else (
                    eq.a + mpf("0.04") * (eq.b - eq.a))
                if nn2 * defo.Q(clip) <= target:
                    return clip, False
                lo_x, hi_x = mpf(0), clip
                for _ in range(60):
                    mid = (lo_x + hi_x) / 2
                    if nn2 * defo.Q(mid) < target:
                        lo_x = mid
                    else:
                        hi_x = mid
                return (lo_x + hi_x) / 2, True

            x_cuts = []  # ascending x edges of the sigma region
            for direction in (-1, +1):
                side = []
                x1, _ = sigma_edge(direction, delta)
                wmin = min(mpf("0.005") / spec.n, abs(x1) / 4)
                side.extend(
                    direction * x
                    for (x, _hi) in geometric_panels(mpf(0), abs(x1), "lo", wmin, ratio=mpf("1.6"))
                )
                j = 2
                while True:
                    xj, interior = sigma_edge(direction, j * delta)
                    side.append(direction * abs(xj))
                    if not interior or j * delta >= budget:
                        break
                    j += 1
                x_cuts.extend(side)
            x_cuts = sorted(set(x_cuts))
            th_cuts = sorted(mpmath.acos((x - c) / r) for x in x_cuts)
            th_lo, th_hi = th_cuts[0], th_cuts[-1]

            theta_panels = []
            for (lo, hi) in base_panels:
                if hi <= th_lo or lo >= th_hi:
                    theta_panels.append((lo, hi))
                else:
                    if lo < th_lo:
                        theta_panels.append((lo, th_lo))
                    if hi > th_hi:
                        theta_panels.append((th_hi, hi))
            theta_panels.extend(zip(th_cuts[:-1], th_cuts[1:]))
            theta_panels = [(lo, hi) for (lo, hi) in theta_panels if hi - lo > mpf("1e-40")]
            theta_panels.sort(key=lambda p: p[0])

        nodes, weights = [], []
        for (lo, hi) in theta_panels:
            osc = float(mpf("1.15") * K * freq * (hi - lo))
            m_here = max(24, analytic_m, int((osc + 0.45 * dps + 16) * point_factor) + 1)
            rule = legendre_rule(m_here, dps).mapped(lo, hi)
            for th, w in zip(rule.nodes, rule.weights):
                x = c + r * mpmath.cos(th)
                nodes.append(x)
                weights.append(w * r * mpmath.sin(th))

        bulk_points = len(nodes)

        # ---- tails: fixed decay-exponent increments ----------------------
        m_tail = max(30, int((0.45 * dps + 16) * point_factor))
        tau = (dps + guard) * mpmath.log(10)
        delta = mpf(2 * m_tail) / 3
        tail_panels = 0
        for direction, outer in ((+1, xhi), (-1, xlo)):
            edge_pt = eq.b if direction > 0 else eq.a
            span = abs(outer - edge_pt)
            # boundary layer in u = sqrt(|x - edge|): geometric toward the edge
            u_bl = mpmath.sqrt(span) / 4
            layers = geometric_panels(mpf(0), u_bl, "lo", u_bl / 2**7, ratio=2)
            for (lo, hi) in layers:
                rule = legendre_rule(m_tail, dps).mapped(lo, hi)
                for u, w in zip(rule.nodes, rule.weights):
                    x = edge_pt + direction * u * u
                    nodes.append(x)
                    weights.append(w * 2 * u)
                tail_panels += 1
            # outer region: panel edges at fixed decay increments
            x_prev = edge_pt + direction * u_bl**2
            g_prev = spec.n * eq.edge_gap(x_prev)
            j = 1
            while g_prev < tau and j < 400:
                target = g_prev + delta
                lo_x, hi_x = x_prev, outer
                if spec.n * eq.edge_gap(outer) <= target:
                    x_next = outer
                else:
                    for _ in range(30):
                        mid = (lo_x + hi_x) / 2
                        if spec.n * eq.edge_gap(mid) < target:
                            lo_x = mid
                        else:
                            hi_x = mid
                    x_next = (lo_x + hi_x) / 2
                lo, hi = (x_prev, x_next) if direction > 0 else (x_next, x_prev)
                rule = legendre_rule(m_tail, dps).mapped(lo, hi)
                nodes.extend(rule.nodes)
                weights.extend(rule.weights)
                tail_panels += 1
                x_prev = x_next
                g_prev = spec.n * eq.edge_gap(x_prev)
                if x_next == outer:
                    break
                j += 1

        return Discretization(
            nodes=tuple(nodes),
            weights=tuple(weights),
            window=(xlo, xhi),
            bulk_panels=len(theta_panels),
            bulk_points=bulk_points,
            tail_panels=tail_panels,
        )


@dataclass(frozen=True)
class RecurrenceTable:
    """Three-term recurrence data of the discretized weighted inner product.

    gamma_sq[k-1] holds gamma_k^2 (k = 1..K), beta[k] holds beta_k
    (k = 0..K-1), h_sq[k] the norming constants 1/integral(P_k^2 w_n).
    The orthonormal off-diagonals are b_k = gamma_{k+1}; m0 is the total
    weight mass.  Immutable; evaluators are pure.
    """

    n: int
    K: int
    dps: int
    s: object
    gamma_sq: tuple
    beta: tuple
    h_sq: tuple
    m0: mpf
    window: tuple
    node_count: int
    meta: dict = field(repr=False, default_factory=dict)

    def orthonormal_values(self, spec, x, upto: int):
        """[p_0(x), ..., p_upto(x)] by the three-term recurrence."""
        x = mpf(x)
        vals = [1 / mpmath.sqrt(self.m0)]
        if upto == 0:
            return vals
        b = [mpmath.sqrt(g) for g in self.gamma_sq]
        p_prev = mpf(0)
        p = vals[0]
        for k in range(upto):
            p_next = ((x - self.beta[k]) * p - (b[k - 1] if k > 0 else mpf(0)) * p_prev) / b[k]
            vals.append(p_next)
            p_prev, p = p, p_next
        return vals

    def orthonormal_values_deriv(self, spec, x, upto: int):
        """(values, derivatives) of p_0..p_upto at x."""
        x = mpf(x)
        b = [mpmath.sqrt(g) for g in self.gamma_sq]
        p_prev, p = mpf(0), 1 / mpmath.sqrt(self.m0)
        d_prev, d = mpf(0), mpf(0)
        vals, ders = [p], [d]
        for k in range(upto):
            bk = b[k]
            bkm = b[k - 1] if k > 0 else mpf(0)
            p_next = ((x - self.beta[k]) * p - bkm * p_prev) / bk
            d_next = (p + (x - self.beta[k]) * d - bkm * d_prev) / bk
            vals.append(p_next)
            ders.append(d_next)
            p_prev, p, d_prev, d = p, p_next, d, d_next
        return vals, ders


def conservative_dps(spec: EnsembleSpec, eq: EquilibriumData, dps_probe: int = DEFAULT_DPS) -> int:
    """Default working precision: max(60, ceil(0.25 n max|V| on window) + 30)."""
    with workdps(dps_probe):
        xlo, xhi = quadrature_window(eq, spec.n, dps_probe)
        grid = [xlo + (xhi - xlo) * i / 64 for i in range(65)]
        vmax = max(abs(spec.V(x)) for x in grid)
        return max(DEFAULT_DPS, int(mpmath.ceil(mpf("0.25") * spec.n * vmax)) + 30)


def compute_recurrence(
    spec: EnsembleSpec,
    K: int | None = None,
    dps: int | None = None,
    eq: EquilibriumData | None = None,
    max_nodes: int | None = None,
    point_factor: float = 1.0,
    disc: Discretization | None = None,
) -> RecurrenceTable:
    """Tridiagonalize the discretized multiplication operator (stabilized Stieltjes).

    Lanczos with full reorthogonalization at precision ``dps`` on weighted
    vectors; deterministic for fixed inputs.
    """
    if K is None:
        K = spec.n + 2
    if K < 1 or K > _MAX_DEGREE:
        raise DomainError(f"requested degree K={K} outside 1..{_MAX_DEGREE}")
    if eq is None:
        eq = solve_equilibrium(spec.V, dps or DEFAULT_DPS)
    if dps is None:
        dps = conservative_dps(spec, eq)
    dps = require_dps(dps)

    with workdps(dps):
        if disc is None:
            disc = build_discretization(spec, eq, K, dps, point_factor=point_factor)
        if not spec.is_ground:
            spec.deformation.check_positive(disc.window[0], disc.window[1])
        N = disc.size
        if N < 3 * K:
            raise QuadratureError(
                f"discretization with {N} nodes cannot resolve degree K={K}; "
                f"need at least {3 * K} nodes - increase point_factor"
            )
        if max_nodes is not None and N > max_nodes:
            raise QuadratureError(
                f"discretization needs {N} nodes, above the configured cap {max_nodes}"
            )

        xs = list(disc.nodes)
        d = [mpmath.exp((mpmath.log(w) + log_weight(spec, x)) / 2) for x, w in zip(xs, disc.weights)]
        m0 = mpmath.fdot(d, d)
        inv_norm = 1 / mpmath.sqrt(m0)
        v = [di * inv_norm for di in d]
        basis = [v]
        v_prev = None
        alphas, betas_off = [], []
        for k in range(K):
            w = [xi * vi for xi, vi in zip(xs, v)]
            a_k = mpmath.fdot(v, w)
            alphas.append(a_k)
            w = [wi - a_k * vi for wi, vi in zip(w, v)]
            if v_prev is not None:
                bprev = betas_off[-1]
                w = [wi - bprev * pi for wi, pi in zip(w, v_prev)]
            # full reorthogonalization, one pass
            for q in basis:
                c = mpmath.fdot(q, w)
                w = [wi - c * qi for wi, qi in zip(w, q)]
            b_sq = mpmath.fdot(w, w)
            if b_sq <= 0:
                raise PrecisionError(
                    f"lost positivity of gamma_{k+1}^2 in the Lanczos step; "
                    f"increase the working precision above {dps} digits"
                )
            b_k = mpmath.sqrt(b_sq)
            betas_off.append(b_k)
            v_prev = v
            v = [wi / b_k for wi in w]
            basis.append(v)

        gamma_sq = tuple(b * b for b in betas_off)
        h_sq = []
        acc = m0
        for k in range(K):
            h_sq.append(1 / acc)
            acc *= gamma_sq[k]
        h_sq.append(1 / acc)

        return RecurrenceTable(
            n=spec.n,
            K=K,
            dps=dps,
            s=(mpmath.inf if spec.is_ground else spec.deformation.s),
            gamma_sq=gamma_sq,
            beta=tuple(alphas),
            h_sq=tuple(h_sq),
            m0=m0,
            window=disc.window,
            node_count=N,
            meta={
                "bulk_panels": disc.bulk_panels,
                "tail_panels": disc.tail_panels,
                "point_factor": point_factor,
            },
        )


def cd_kernel(tab: RecurrenceTable, spec: EnsembleSpec, x, y):
    """Correlation kernel K_n(x, y), sqrt-weight prefactor included.

    Uses the Christoffel-Darboux form; the diagonal goes through the
    confluent (derivative) variant.
    """
    n = spec.n
    if tab.K < n:
        raise DomainError(f"table holds degrees up to {tab.K}, kernel needs {n}")
    with workdps(tab.dps):
        x, y = mpf(x), mpf(y)
        pref = mpmath.exp((log_weight(spec, x) + log_weight(spec, y)) / 2)
        gamma_n = mpmath.sqrt(tab.gamma_sq[n - 1])
        if x == y:
            vals, ders = tab.orthonormal_values_deriv(spec, x, n)
            core = gamma_n * (ders[n] * vals[n - 1] - ders[n - 1] * vals[n])
        else:
            px = tab.orthonormal_values(spec, x, n)
            py = tab.orthonormal_values(spec, y, n)
            core = gamma_n * (px[n] * py[n - 1] - px[n - 1] * py[n]) / (x - y)
        return pref * core


def kernel_sum(tab: RecurrenceTable, spec: EnsembleSpec, x, y):
    """Direct orthonormal sum form of K_n(x, y); oracle for cd_kernel."""
    n = spec.n
    with workdps(tab.dps):
        x, y = mpf(x), mpf(y)
        pref = mpmath.exp((log_weight(spec, x) + log_weight(spec, y)) / 2)
        px = tab.orthonormal_values(spec, x, n - 1)
        py = tab.orthonormal_values(spec, y, n - 1)
        return pref * mpmath.fdot(px, py)


def scaled_kernel(tab: RecurrenceTable, spec: EnsembleSpec, eq: EquilibriumData, zeta, xi):
    """Bulk-rescaled kernel (n pi phi_V(0))^-1 K_n(zeta/c, xi/c), c = n pi phi_V(0)."""
    with workdps(tab.dps):
        c = spec.n * mpmath.pi * eq.phiV0
        return cd_kernel(tab, spec, mpf(zeta) / c, mpf(xi) / c) / c

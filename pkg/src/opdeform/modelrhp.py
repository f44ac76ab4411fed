"""Collocation solver for the deformed-sine model Riemann-Hilbert problem.

The unknown is posed on six rays (angles 0, +-pi/8, +-7pi/8, pi; the rays
in the left half-plane are oriented toward the origin, the others away
from it).  Solving directly for the matrix with jump built from
lambda(z) = 1/(1 + exp(-s - u z^2)) is hopeless numerically: its jump does
not approach the identity along the contour.  Instead we precondition by
the explicit sine parametrix S(z) and solve for L = Phi S^{-1}, whose jump
deviation is Gaussian-small:

    rays off the real axis:  J = I +- exp(-s - u z^2) exp(+-2 i z) E_{21/12},
    on the real axis:        J = diag(1/lambda_s, lambda_s),

so |J - I| <= exp(-s) |exp(-u z^2)| everywhere on the contour.  L is
represented as I + (Cauchy transform of per-ray densities); densities are
Chebyshev interpolants on each truncated ray and the jump relation
L_+ = L_- J is collocated at first-kind points (never at the ray
junction).  The rows of the density decouple and the two row systems
share one matrix; column sparsity of the rank-one ray jumps is exploited.

From the solution: the 1/z coefficient L_1 = Phi_1 (the parametrix
contributes no 1/z term), giving the derived scalars p = i (Phi_1)_11 and
q = -i (Phi_1)_12, the oscillation amplitude Q = q/T, the scalar wave
function Phi(v) = [Phi(-Tv)]_{11,+}, and the limiting kernel via two
independent routes (scalar products vs the matrix sandwich).

Everything downstream of one solve is a pure evaluation; solutions are
immutable.  Collocation blocks depend only on (modes, digits) - the ray
geometry is scale-free - so one cached table serves every (s, T) sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
from mpmath import mpc, mpf

from .errors import ConvergenceError, DomainError, MeshError
from .precision import DEFAULT_DPS, require_dps, workdps
from .cauchy import cheb_cauchy_table
from .quadrature import legendre_rule, uniform_panels
from .series import polyval

REALITY_TOL = mpf("1e-8")

_colloc_cache: dict[tuple[int, int], "RayCollocationTable"] = {}


# ---------------------------------------------------------------------------
# 2x2 helpers (row-major lists)


def m2_mul(A, B):
    return [
        [A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]],
        [A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]],
    ]


def m2_inv(A):
    det = A[0][0] * A[1][1] - A[0][1] * A[1][0]
    return [[A[1][1] / det, -A[0][1] / det], [-A[1][0] / det, A[0][0] / det]]


def m2_det(A):
    return A[0][0] * A[1][1] - A[0][1] * A[1][0]


def m2_norm(A):
    return max(abs(A[i][j]) for i in range(2) for j in range(2))


def m2_sub(A, B):
    return [[A[i][j] - B[i][j] for j in range(2)] for i in range(2)]


_I2 = ((mpf(1), mpf(0)), (mpf(0), mpf(1)))


def m2_eye():
    return [[mpf(1), mpf(0)], [mpf(0), mpf(1)]]


# ---------------------------------------------------------------------------
# contour geometry


@dataclass(frozen=True)
class Ray:
    angle_eighths: int  # angle = angle_eighths * pi/8
    outward: bool
    kind: str  # 'real' | 'upper' | 'lower'

    @property
    def cols(self):
        return (0, 1) if self.kind == "real" else ((0,) if self.kind == "upper" else (1,))


#: Ray order fixed once; used everywhere for indexing.
RAYS = (
    Ray(0, True, "real"),
    Ray(1, True, "upper"),
    Ray(7, False, "upper"),
    Ray(8, False, "real"),
    Ray(-7, False, "lower"),
    Ray(-1, True, "lower"),
)

#: Sector labels of the sine parametrix on each side of each ray.
RAY_PLUS_SECTOR = ("S0+", "S1+", "S1+", "S2+", "S2-", "S0-")
RAY_MINUS_SECTOR = ("S0-", "S0+", "S2+", "S2-", "S1-", "S1-")


def _ray_alpha_beta(ray: Ray):
    """Unit-radius affine data: zeta/R = alpha*x + beta maps [-1,1] onto the ray."""
    phase = mpmath.exp(1j * mpmath.pi * ray.angle_eighths / 8)
    half = phase / 2
    return (half, half) if ray.outward else (-half, half)


def truncation_radius(s, u, tol):
    """Radius where the jump-deviation bound M e^{-s} e^{-u Re z^2} falls below tol."""
    s, u, tol = mpf(s), mpf(u), mpf(tol)
    return mpmath.sqrt((mpmath.log(4 / tol) + max(mpf(0), -s)) / (u * mpmath.cos(mpmath.pi / 4)))


@dataclass(frozen=True)
class ContourMesh:
    """Truncated six-ray contour with per-ray Chebyshev collocation nodes."""

    M: int
    R: mpf
    dps: int
    tol: mpf

    def nodes_on_ray(self, j: int):
        table = cheb_cauchy_table(self.M, self.dps)
        al, be = _ray_alpha_beta(RAYS[j])
        return [self.R * (al * x + be) for x in table.nodes]


def build_mesh(s, u, M: int = 48, dps: int = DEFAULT_DPS, tol="1e-12") -> ContourMesh:
    dps = require_dps(dps)
    with workdps(dps):
        R = truncation_radius(s, u, mpf(tol))
        return ContourMesh(M=M, R=+R, dps=dps, tol=mpf(tol))


# ---------------------------------------------------------------------------
# jump data


def lambda_gauss(z, s, u):
    """1/(1 + exp(-s - u z^2))."""
    return 1 / (1 + mpmath.exp(-s - u * z * z))


def jump_L(z, s, u, kind: str):
    """Jump matrix of the preconditioned unknown L on the given ray kind."""
    E = mpmath.exp(-s - u * z * z)
    if kind == "real":
        lam = 1 / (1 + E)
        return [[1 + E, mpf(0)], [mpf(0), lam]]
    if kind == "upper":
        return [[mpf(1), mpf(0)], [E * mpmath.exp(2j * z), mpf(1)]]
    return [[mpf(1), -E * mpmath.exp(-2j * z)], [mpf(0), mpf(1)]]


def jump_Phi(z, s, u, kind: str):
    """Jump matrix of the un-preconditioned problem (used for consistency checks)."""
    lam = lambda_gauss(z, s, u)
    if kind == "real":
        return [[mpf(0), lam], [-1 / lam, mpf(0)]]
    return [[mpf(1), mpf(0)], [1 / lam, mpf(1)]]


def cyclic_jump_product(s, u, which="L", dps: int = DEFAULT_DPS):
    """Product of the six jump limits at the origin in counterclockwise order.

    Boundedness of the solution at the ray junction forces this to be the
    identity; rays oriented toward the origin enter inverted.
    """
    with workdps(dps):
        jf = jump_L if which == "L" else jump_Phi
        z = mpf(0)
        order = (1, 2, 3, 4, 5, 0)
        acc = m2_eye()
        for j in order:
            J = jf(z, mpf(s), mpf(u), RAYS[j].kind)
            if not RAYS[j].outward:
                J = m2_inv(J)
            acc = m2_mul(acc, J)
        return acc


# ---------------------------------------------------------------------------
# sine parametrix


def sine_parametrix(z, sector: str | None = None):
    """Explicit undeformed solution, piecewise by sector; det == 1 everywhere."""
    z = mpc(z)
    if sector is None:
        sector = _sector_of(z)
    e = mpmath.exp(-1j * z)
    ei = 1 / e
    if sector in ("S0+", "S2+"):
        return [[e, mpf(0)], [mpf(0), ei]]
    if sector == "S1+":
        return [[e, mpf(0)], [ei, ei]]
    if sector in ("S0-", "S2-"):
        return [[mpf(0), -e], [ei, mpf(0)]]
    if sector == "S1-":
        return [[e, -e], [ei, mpf(0)]]
    raise DomainError(f"unknown sector {sector!r}")


def _sector_of(z):
    a = mpmath.arg(z)
    pi8 = mpmath.pi / 8
    eps = mpf(10) ** (-mpmath.mp.dps + 8)
    for bound in (0, pi8, 7 * pi8, mpmath.pi, -pi8, -7 * pi8, -mpmath.pi):
        if abs(a - bound) < eps:
            raise DomainError(
                "point lies on the contour; pass an explicit sector for the boundary value"
            )
    if 0 < a < pi8:
        return "S0+"
    if pi8 < a < 7 * pi8:
        return "S1+"
    if 7 * pi8 < a <= mpmath.pi:
        return "S2+"
    if -pi8 < a < 0:
        return "S0-"
    if -7 * pi8 < a < -pi8:
        return "S1-"
    return "S2-"


# ---------------------------------------------------------------------------
# collocation table (geometry-only, cached per (M, dps))


class RayCollocationTable:
    """Cauchy-basis vectors of every ray evaluated at every collocation node.

    Scale-free: with all rays truncated at a common radius, the Chebyshev
    coordinates of nodes and cross-ray evaluation points do not depend on
    the radius, so the table serves every (s, T).
    """

    def __init__(self, M: int, dps: int):
        self.M = M
        self.dps = dps
        self.ctab = cheb_cauchy_table(M, dps)
        with workdps(dps):
            ab = [_ray_alpha_beta(r) for r in RAYS]
            self.alpha = [a for a, _ in ab]
            self.beta = [b for _, b in ab]
            # basis[i][t][j] = [I_k(xi)]_k for target node t of ray i, source ray j
            self.basis = []
            for i in range(6):
                rows = []
                for x_t in self.ctab.nodes:
                    zhat = self.alpha[i] * x_t + self.beta[i]
                    row = []
                    for j in range(6):
                        if i == j:
                            row.append(self.ctab.cauchy_basis(x_t, side=-1))
                        else:
                            xi = (zhat - self.beta[j]) / self.alpha[j]
                            row.append(self.ctab.cauchy_basis(xi))
                    rows.append(row)
                self.basis.append(rows)
        self._midpoint_basis = None

    def midpoint_basis(self):
        """Like ``basis`` but at inter-node midpoints, with both one-sided values."""
        if self._midpoint_basis is not None:
            return self._midpoint_basis
        with workdps(self.dps):
            mids = [
                (self.ctab.nodes[t] + self.ctab.nodes[t + 1]) / 2 for t in range(self.M - 1)
            ]
            out = []
            for i in range(6):
                rows = []
                for xm in mids:
                    zhat = self.alpha[i] * xm + self.beta[i]
                    row = []
                    for j in range(6):
                        if i == j:
                            row.append(
                                (
                                    self.ctab.cauchy_basis(xm, side=+1),
                                    self.ctab.cauchy_basis(xm, side=-1),
                                )
                            )
                        else:
                            xi = (zhat - self.beta[j]) / self.alpha[j]
                            b = self.ctab.cauchy_basis(xi)
                            row.append((b, b))
                    rows.append(row)
                out.append(rows)
            self._midpoints = mids
            self._midpoint_basis = out
            return out


def ray_collocation_table(M: int, dps: int) -> RayCollocationTable:
    key = (M, dps)
    tab = _colloc_cache.get(key)
    if tab is None:
        tab = RayCollocationTable(M, dps)
        _colloc_cache[key] = tab
    return tab


# ---------------------------------------------------------------------------
# linear algebra


def lu_solve(A, rhss):
    """In-place partial-pivot Gaussian elimination; solves for several RHS."""
    n = len(A)
    nr = len(rhss)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        if abs(A[piv][col]) == 0:
            raise MeshError("singular collocation system; refine the mesh")
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            for b in rhss:
                b[col], b[piv] = b[piv], b[col]
        arow = A[col]
        inv = 1 / arow[col]
        for r in range(col + 1, n):
            f = A[r][col] * inv
            if f == 0:
                continue
            A[r][col] = f
            brow = A[r]
            for c in range(col + 1, n):
                brow[c] -= f * arow[c]
            for b in rhss:
                b[r] -= f * b[col]
    xs = []
    for b in rhss:
        x = list(b)
        for r in range(n - 1, -1, -1):
            acc = x[r]
            arow = A[r]
            for c in range(r + 1, n):
                acc -= arow[c] * x[c]
            x[r] = acc / arow[r]
        xs.append(x)
    return xs


# ---------------------------------------------------------------------------
# solution object


@dataclass(frozen=True)
class ModelSolution:
    """Solved preconditioned problem at one (s, T); immutable, evaluators pure."""

    mesh: ContourMesh
    s: mpf
    u: mpf
    T: mpf
    coeffs: tuple  # coeffs[row][col][ray] -> tuple of M Chebyshev coefficients or None
    Phi1: tuple
    p: mpf
    q: mpf
    P_ct: mpf
    Q_osc: mpf
    imag_residual: mpf
    method: str
    meta: dict = field(repr=False, default_factory=dict)

    # -- low-level evaluation ------------------------------------------------

    def _table(self) -> RayCollocationTable:
        return ray_collocation_table(self.mesh.M, self.mesh.dps)

    def _cauchy_sum(self, basis_by_ray):
        """L(z) - I from per-ray basis vectors [I_k(xi_j(z))]."""
        out = [[mpc(0), mpc(0)], [mpc(0), mpc(0)]]
        for r in range(2):
            for c in range(2):
                acc = mpc(0)
                for j in range(6):
                    coef = self.coeffs[r][c][j]
                    if coef is None:
                        continue
                    acc += mpmath.fdot(coef, basis_by_ray[j])
                out[r][c] = acc
        return out

    def _basis_at(self, z, on_ray: int | None = None, side: int | None = None):
        tab = self._table()
        zhat = mpc(z) / self.mesh.R
        row = []
        for j in range(6):
            if j == on_ray:
                xi = (zhat - tab.beta[j]) / tab.alpha[j]
                row.append(tab.ctab.cauchy_basis(xi.real, side=side))
            else:
                xi = (zhat - tab.beta[j]) / tab.alpha[j]
                row.append(tab.ctab.cauchy_basis(xi))
        return row

    def L_at(self, z):
        """L(z) off the contour."""
        with workdps(self.mesh.dps):
            if self.method == "exact":
                return m2_eye()
            _sector_of(mpc(z))  # raises on the contour
            dev = self._cauchy_sum(self._basis_at(z))
            dev[0][0] += 1
            dev[1][1] += 1
            return dev

    def _L_real_sided(self, x, side: int):
        """One-sided value of L at real x != 0 (|x| < R)."""
        with workdps(self.mesh.dps):
            if self.method == "exact":
                return m2_eye()
            x = mpf(x)
            if x == 0 or abs(x) >= self.mesh.R:
                raise DomainError("boundary evaluation needs 0 < |x| < R")
            ray = 0 if x > 0 else 3
            dev = self._cauchy_sum(self._basis_at(x, on_ray=ray, side=side))
            dev[0][0] += 1
            dev[1][1] += 1
            return dev

    # -- derived quantities ---------------------------------------------------

    def phi_matrix_real_plus(self, x):
        """Phi(x) = L_+(x) Phi_sin,+(x) for real x (the '+' boundary value)."""
        with workdps(self.mesh.dps):
            L = self._L_real_sided(x, +1)
            ray = 0 if mpf(x) > 0 else 3
            S = sine_parametrix(mpf(x), sector=RAY_PLUS_SECTOR[ray])
            return m2_mul(L, S)

    def phi_scalar(self, v):
        """Wave function Phi(v); equals e^{iTv} when undeformed.

        This is the 11-entry of the problem BEFORE the lens opening: the
        lens factor must be undone, Phi(v) = [M (I + E_21/lambda)]_{11,+}
        with M = Phi(-Tv).  Keeping the bare 11-entry is wrong at relative
        order e^{-s} (it breaks the exact scalar/matrix kernel identity).
        """
        with workdps(self.mesh.dps):
            x = -self.T * mpf(v)
            P = self.phi_matrix_real_plus(x)
            return P[0][0] + P[0][1] / lambda_gauss(x, self.s, self.u)

    def k_infinity_routes(self, zeta, xi):
        """(scalar-route, matrix-route) values of the limiting kernel."""
        with workdps(self.mesh.dps):
            zeta, xi = mpf(zeta), mpf(xi)
            if zeta == xi:
                raise DomainError("use k_infinity for the diagonal")
            lz = lambda_gauss(zeta, self.s, self.u)
            lx = lambda_gauss(xi, self.s, self.u)
            pref = mpmath.sqrt(lz) * mpmath.sqrt(lx) / (2j * mpmath.pi * (zeta - xi))
            g = lambda w: self.phi_scalar(w / self.T)
            scalar = pref * (g(zeta) * g(-xi) - g(-zeta) * g(xi))
            A = [[mpf(1), mpf(0)], [-1 / lx, mpf(1)]]
            B = [[mpf(1), mpf(0)], [1 / lz, mpf(1)]]
            sandwich = m2_mul(
                m2_mul(A, m2_inv(self.phi_matrix_real_plus(xi))),
                m2_mul(self.phi_matrix_real_plus(zeta), B),
            )
            matrix = pref * sandwich[1][0]
            return scalar, matrix

    def k_infinity(self, zeta, xi):
        """Limiting kernel (scalar route); diagonal via a symmetric limit."""
        with workdps(self.mesh.dps):
            zeta, xi = mpf(zeta), mpf(xi)
            if zeta != xi:
                val, other = self.k_infinity_routes(zeta, xi)
                if abs(val - other) > mpf(10) ** (-8):
                    raise MeshError(
                        f"kernel route disagreement {mpmath.nstr(abs(val - other), 5)}"
                    )
                return val.real if abs(val.imag) < REALITY_TOL else val
            h = mpf(10) ** (-self.mesh.dps // 3)
            a, _ = self.k_infinity_routes(zeta, xi + h)
            b, _ = self.k_infinity_routes(zeta, xi - h)
            v = (a + b) / 2
            return v.real if abs(v.imag) < REALITY_TOL else v

    def det_phi(self, z):
        """det Phi(z) = det L(z); equals 1 for the exact solution."""
        with workdps(self.mesh.dps):
            return m2_det(self.L_at(z))

    def jump_residual(self):
        """max over inter-node midpoints of |L_+ - L_- J| (a posteriori check)."""
        with workdps(self.mesh.dps):
            tab = self._table()
            midb = tab.midpoint_basis()
            worst = mpf(0)
            for i in range(6):
                al, be = tab.alpha[i], tab.beta[i]
                for t in range(self.mesh.M - 1):
                    xm = tab._midpoints[t]
                    z = self.mesh.R * (al * xm + be)
                    plus_basis = [midb[i][t][j][0] for j in range(6)]
                    minus_basis = [midb[i][t][j][1] for j in range(6)]
                    Lp = self._cauchy_sum(plus_basis)
                    Lm = self._cauchy_sum(minus_basis)
                    Lp[0][0] += 1
                    Lp[1][1] += 1
                    Lm[0][0] += 1
                    Lm[1][1] += 1
                    J = jump_L(z, self.s, self.u, RAYS[i].kind)
                    worst = max(worst, m2_norm(m2_sub(Lp, m2_mul(Lm, J))))
            return worst

    def sup_deviation(self):
        """max over collocation nodes of |L_- - I|."""
        with workdps(self.mesh.dps):
            tab = self._table()
            worst = mpf(0)
            for i in range(6):
                for t in range(self.mesh.M):
                    dev = self._cauchy_sum(tab.basis[i][t])
                    worst = max(worst, m2_norm(dev))
            return worst


# ---------------------------------------------------------------------------
# assembly and solve


def _jump_deviation(z, s, u, kind):
    J = jump_L(z, s, u, kind)
    return [[J[0][0] - 1, J[0][1]], [J[1][0], J[1][1] - 1]]


def solve_model(
    s,
    u,
    M: int = 48,
    dps: int = DEFAULT_DPS,
    tol="1e-12",
    method: str = "dense",
    mesh: ContourMesh | None = None,
    max_iter: int = 400,
) -> ModelSolution:
    """Solve the preconditioned problem at (s, u); method 'dense' or 'neumann'.

    Both methods share the same discretization, so their agreement is a
    genuine independent-solver cross-check, not a tautology.
    """
    dps = require_dps(dps)
    with workdps(dps):
        s, u = mpf(s), mpf(u)
        if u <= 0:
            raise DomainError("coupling u must be positive")
        T = 1 / mpmath.sqrt(u)
        if mesh is None:
            mesh = build_mesh(s, u, M=M, dps=dps, tol=tol)
        M = mesh.M
        if mpmath.isinf(s):
            empty = tuple(
                tuple(tuple(None for _ in range(6)) for _ in range(2)) for _ in range(2)
            )
            zero = mpf(0)
            return ModelSolution(
                mesh=mesh, s=s, u=u, T=T,
                coeffs=empty,
                Phi1=((zero, zero), (zero, zero)),
                p=zero, q=zero, P_ct=zero, Q_osc=zero,
                imag_residual=zero, method="exact",
            )

        tab = ray_collocation_table(M, dps)
        nodes = [
            [mesh.R * (tab.alpha[j] * x + tab.beta[j]) for x in tab.ctab.nodes]
            for j in range(6)
        ]
        devs = [
            [_jump_deviation(nodes[j][l], s, u, RAYS[j].kind) for l in range(M)]
            for j in range(6)
        ]

        # unknown layout: for each ray j, for each active column c, M coefficients
        blocks = []
        for j, ray in enumerate(RAYS):
            for c in ray.cols:
                blocks.append((j, c))
        offset = {bc: i * M for i, bc in enumerate(blocks)}
        N = M * len(blocks)

        Tmat = [
            [mpmath.cos(k * mpmath.acos(x)) for k in range(M)] for x in tab.ctab.nodes
        ]

        if method == "dense":
            sols = _solve_dense(tab, devs, blocks, offset, N, M, Tmat)
        elif method == "neumann":
            sols = _solve_neumann(tab, devs, blocks, offset, N, M, mesh, max_iter)
        else:
            raise DomainError(f"unknown solve method {method!r}")

        coeffs = [[[None] * 6 for _ in range(2)] for _ in range(2)]
        for (j, c) in blocks:
            off = offset[(j, c)]
            for r in range(2):
                coeffs[r][c][j] = tuple(sols[r][off : off + M])
        coeffs = tuple(tuple(tuple(col) for col in row) for row in coeffs)

        # Phi_1 = -(1/2 pi i) * sum over rays of the density integral
        Phi1 = [[mpc(0), mpc(0)], [mpc(0), mpc(0)]]
        tau = tab.ctab.tau
        for r in range(2):
            for c in range(2):
                acc = mpc(0)
                for j in range(6):
                    coef = coeffs[r][c][j]
                    if coef is None:
                        continue
                    acc += mesh.R * tab.alpha[j] * mpmath.fdot(coef, tau)
                Phi1[r][c] = -acc / (2j * mpmath.pi)

        p_raw = 1j * Phi1[0][0]
        q_raw = -1j * Phi1[0][1]
        q_alt = 1j * Phi1[1][0]
        imag_res = max(abs(p_raw.imag), abs(q_raw.imag), abs(q_alt.imag),
                       abs(q_raw - q_alt))
        if imag_res > REALITY_TOL:
            raise MeshError(
                "extracted p/q violate the reality/antisymmetry structure: "
                f"residual {mpmath.nstr(imag_res, 5)}; refine the mesh"
            )
        p, q = p_raw.real, q_raw.real
        return ModelSolution(
            mesh=mesh, s=+s, u=+u, T=+T,
            coeffs=coeffs,
            Phi1=tuple(tuple(v for v in row) for row in Phi1),
            p=p, q=q, P_ct=p / T, Q_osc=q / T,
            imag_residual=imag_res,
            method=method,
            meta={"unknowns": N},
        )


def _solve_dense(tab, devs, blocks, offset, N, M, Tmat):
    A = [[mpc(0)] * N for _ in range(N)]
    rhs0 = [mpc(0)] * N
    rhs1 = [mpc(0)] * N
    for (i, cp) in blocks:
        row_off = offset[(i, cp)]
        for t in range(M):
            row = A[row_off + t]
            D = devs[i][t]
            # interpolation part: phi_{r,cp}(node t) via Chebyshev synthesis
            dest = offset[(i, cp)]
            Trow = Tmat[t]
            for k in range(M):
                row[dest + k] += Trow[k]
            # minus C^-[phi] * (J - I)
            basis_row = tab.basis[i][t]
            for (j, c) in blocks:
                f = D[c][cp]
                if f == 0:
                    continue
                src = offset[(j, c)]
                bas = basis_row[j]
                for k in range(M):
                    row[src + k] -= f * bas[k]
            rhs0[row_off + t] = D[0][cp]
            rhs1[row_off + t] = D[1][cp]
    return lu_solve(A, [rhs0, rhs1])


def _solve_neumann(tab, devs, blocks, offset, N, M, mesh, max_iter):
    W = tab.ctab.W
    tol_iter = mesh.tol / 100
    sols = []
    for r in range(2):
        vals = {bc: [devs[bc[0]][t][r][bc[1]] for t in range(M)] for bc in blocks}
        prev_delta = None
        grow = 0
        for it in range(max_iter):
            coef = {bc: [mpmath.fdot(W[k], vals[bc]) for k in range(M)] for bc in blocks}
            delta = mpf(0)
            new_vals = {}
            for (i, cp) in blocks:
                out = []
                for t in range(M):
                    basis_row = tab.basis[i][t]
                    D = devs[i][t]
                    acc = D[r][cp]
                    for (j, c) in blocks:
                        f = D[c][cp]
                        if f == 0:
                            continue
                        acc += mpmath.fdot(coef[(j, c)], basis_row[j]) * f
                    out.append(acc)
                old = vals[(i, cp)]
                delta = max(delta, max(abs(a - b) for a, b in zip(out, old)))
                new_vals[(i, cp)] = out
            vals = new_vals
            if delta < tol_iter:
                break
            if prev_delta is not None and delta > prev_delta:
                grow += 1
                if grow >= 3:
                    raise ConvergenceError(
                        "Neumann iteration diverging (jump deviation too large); "
                        "use the dense solver"
                    )
            else:
                grow = 0
            prev_delta = delta
        else:
            raise ConvergenceError(f"Neumann iteration did not reach {mpmath.nstr(tol_iter, 3)}")
        flat = [mpc(0)] * N
        coef = {bc: [mpmath.fdot(W[k], vals[bc]) for k in range(M)] for bc in blocks}
        for bc in blocks:
            off = offset[bc]
            for k in range(M):
                flat[off + k] = coef[bc][k]
        sols.append(flat)
    return sols


# ---------------------------------------------------------------------------
# derived-quantity operations


def extract_pq(sol: ModelSolution):
    """(p, q, P, Q): 1/z-coefficient scalars and their T-normalized versions."""
    return sol.p, sol.q, sol.P_ct, sol.Q_osc


def q_via_integral(sol: ModelSolution, tol_exp: int = 14):
    """Oscillation amplitude from the total integral of the squared wave function.

    Q = -(1/4 pi i) int Phi(v)^2 lambda'(T v) dv, an independent route that
    must match the 1/z-coefficient extraction.
    """
    with workdps(sol.mesh.dps):
        if mpmath.isinf(sol.s):
            return mpf(0)
        vmax = mpmath.sqrt(max(tol_exp * mpmath.log(10) - min(sol.s, 0), mpf(4))) + 2
        vmax = min(vmax, mpf("0.98") * sol.mesh.R / sol.T)
        half = uniform_panels(mpf(0), vmax, 6)
        panels = [(-hi, -lo) for (lo, hi) in reversed(half)] + half
        rule = legendre_rule(24, sol.mesh.dps)
        acc = mpc(0)
        for (lo, hi) in panels:
            mapped = rule.mapped(lo, hi)
            for v, w in zip(mapped.nodes, mapped.weights):
                E = mpmath.exp(-sol.s - v * v)
                lam_prime = (2 * v / sol.T) * E / (1 + E) ** 2
                phi = sol.phi_scalar(v)
                acc += w * phi * phi * lam_prime
        val = -acc / (4j * mpmath.pi)
        if abs(val.imag) > REALITY_TOL:
            raise MeshError(f"integral route lost reality: Im = {mpmath.nstr(val.imag, 5)}")
        return val.real


def ode_residual(s, T, delta, solver=None, xi_grid=None, dps: int = DEFAULT_DPS):
    """Residual of the nonlocal wave equation via central differences in T.

    max over the grid of |d_T Phi - i v Phi - c(T) Phi(-v)| with
    c(T) = -2 Q(s, T); O(delta^2) for the exact solution family.
    """
    with workdps(dps):
        s, T, delta = mpf(s), mpf(T), mpf(delta)
        if solver is None:
            solver = lambda ss, TT: solve_model(ss, 1 / (TT * TT), dps=dps)
        if xi_grid is None:
            xi_grid = [mpf(x) / 10 for x in (-27, -15, -9, -3, 3, 9, 15, 27)]
        sol_m = solver(s, T - delta)
        sol_0 = solver(s, T)
        sol_p = solver(s, T + delta)
        c = -2 * sol_0.Q_osc
        worst = mpf(0)
        for v in xi_grid:
            dphi = (sol_p.phi_scalar(v) - sol_m.phi_scalar(v)) / (2 * delta)
            resid = dphi - 1j * v * sol_0.phi_scalar(v) - c * sol_0.phi_scalar(-v)
            worst = max(worst, abs(resid))
        return worst


def pde_residual(s, T, delta_s, delta_T, solver=None, dps: int = DEFAULT_DPS, q_floor="1e-30"):
    """Finite-difference residual of d_T(d_T d_s Q / (2Q)) = d_s(Q^2) + 1."""
    with workdps(dps):
        s, T = mpf(s), mpf(T)
        ds, dT = mpf(delta_s), mpf(delta_T)
        if solver is None:
            solver = lambda ss, TT: solve_model(ss, 1 / (TT * TT), dps=dps)
        Q = lambda ss, TT: solver(ss, TT).Q_osc
        center = {}
        for TT in (T - dT, T + dT):
            qc = Q(s, TT)
            if abs(qc) < mpf(q_floor):
                raise DomainError("Q too close to zero on the stencil for the division")
            center[TT] = qc
        def mixed(TT):
            return (
                Q(s + ds, TT + dT) - Q(s - ds, TT + dT)
                - Q(s + ds, TT - dT) + Q(s - ds, TT - dT)
            ) / (4 * ds * dT)
        lhs = (mixed(T + dT) / (2 * center[T + dT]) - mixed(T - dT) / (2 * center[T - dT])) / (2 * dT)
        rhs = (Q(s + ds, T) ** 2 - Q(s - ds, T) ** 2) / (2 * ds) + 1
        return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# finite-degree profile: jump from a general analytic exponent


@dataclass(frozen=True)
class FiniteDegreeSolution:
    """Correction factor relating the finite-degree problem to the limit one."""

    n: int
    L1: tuple
    Phi_n1: tuple
    sup_jump_dev: mpf
    sup_L_dev: mpf


def solve_model_finite_n(
    base: ModelSolution,
    h0_coeffs,
    n: int,
    series_radius,
    method: str = "neumann",
    max_iter: int = 400,
) -> FiniteDegreeSolution:
    """Solve for the ratio between the degree-n profile problem and the limit.

    The exponent is s + n^2 H0(z/n) with H0 an analytic profile given by
    Taylor coefficients valid for |w| <= series_radius; the contour must
    satisfy R <= n * series_radius.  The ratio's jump couples both columns
    (conjugation by the limit solution), so the full 12M-unknown system is
    solved, by Neumann iteration by default (the deviation is small).
    """
    mesh = base.mesh
    dps = mesh.dps
    with workdps(dps):
        h0 = [mpf(c) for c in h0_coeffs]
        if mesh.R > n * mpf(series_radius):
            raise DomainError(
                f"contour radius {mpmath.nstr(mesh.R, 6)} exceeds the profile validity "
                f"n * r = {mpmath.nstr(n * mpf(series_radius), 6)}"
            )
        tab = ray_collocation_table(mesh.M, dps)
        M = mesh.M
        s, u = base.s, base.u

        def lam_pair(z):
            lam_inf = lambda_gauss(z, s, u)
            expo = s + n * n * polyval(h0, z / n)
            lam_n = 1 / (1 + mpmath.exp(-expo))
            return lam_n, lam_inf

        devs = []
        sup_dev = mpf(0)
        for j, ray in enumerate(RAYS):
            row = []
            for l in range(M):
                z = mesh.R * (tab.alpha[j] * tab.ctab.nodes[l] + tab.beta[j])
                Lm = base._cauchy_sum(tab.basis[j][l])
                Lm[0][0] += 1
                Lm[1][1] += 1
                Pm = m2_mul(Lm, sine_parametrix(z, sector=RAY_MINUS_SECTOR[j]))
                Pm_inv = m2_inv(Pm)
                lam_n, lam_inf = lam_pair(z)
                if ray.kind == "real":
                    f1 = lam_n / lam_inf - 1
                    f2 = lam_inf / lam_n - 1
                    E11 = m2_mul(m2_mul(Pm, [[mpf(1), mpf(0)], [mpf(0), mpf(0)]]), Pm_inv)
                    E22 = m2_mul(m2_mul(Pm, [[mpf(0), mpf(0)], [mpf(0), mpf(1)]]), Pm_inv)
                    D = [[f1 * E11[0][0] + f2 * E22[0][0], f1 * E11[0][1] + f2 * E22[0][1]],
                         [f1 * E11[1][0] + f2 * E22[1][0], f1 * E11[1][1] + f2 * E22[1][1]]]
                else:
                    f = 1 / lam_n - 1 / lam_inf
                    E21c = m2_mul(m2_mul(Pm, [[mpf(0), mpf(0)], [mpf(1), mpf(0)]]), Pm_inv)
                    D = [[f * E21c[0][0], f * E21c[0][1]], [f * E21c[1][0], f * E21c[1][1]]]
                sup_dev = max(sup_dev, m2_norm(D))
                row.append(D)
            devs.append(row)

        blocks = [(j, c) for j in range(6) for c in (0, 1)]
        offset = {bc: i * M for i, bc in enumerate(blocks)}
        N = M * len(blocks)
        Tmat = [[mpmath.cos(k * mpmath.acos(x)) for k in range(M)] for x in tab.ctab.nodes]
        if method == "dense":
            sols = _solve_dense(tab, devs, blocks, offset, N, M, Tmat)
        else:
            sols = _solve_neumann(tab, devs, blocks, offset, N, M, mesh, max_iter)

        L1 = [[mpc(0), mpc(0)], [mpc(0), mpc(0)]]
        sup_L = mpf(0)
        for r in range(2):
            for (j, c) in blocks:
                off = offset[(j, c)]
                coef = sols[r][off : off + M]
                L1[r][c] += -mesh.R * tab.alpha[j] * mpmath.fdot(coef, tab.ctab.tau) / (2j * mpmath.pi)
                sup_L = max(sup_L, max(abs(v) for v in coef))
        Phi_n1 = [
            [L1[r][c] + base.Phi1[r][c] for c in range(2)] for r in range(2)
        ]
        return FiniteDegreeSolution(
            n=n,
            L1=tuple(tuple(v for v in row) for row in L1),
            Phi_n1=tuple(tuple(v for v in row) for row in Phi_n1),
            sup_jump_dev=+sup_dev,
            sup_L_dev=+sup_L,
        )

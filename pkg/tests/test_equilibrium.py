"""Equilibrium solve against the semicircle closed forms and variational identities."""

import mpmath
import pytest
from mpmath import mpf

from opdeform.equilibrium import (
    EquilibriumData,
    PotentialSpec,
    effective_params,
    solve_equilibrium,
)
from opdeform.errors import DomainError
from opdeform.precision import workdps
from opdeform.series import ser_compose, ser_eval, ser_trim

DPS = 60
TIGHT = mpf(10) ** (-DPS + 15)


@pytest.fixture(scope="module")
def eq_2x2():
    return solve_equilibrium(PotentialSpec((0, 0, 2)), DPS)


@pytest.fixture(scope="module")
def eq_half_x2():
    return solve_equilibrium(PotentialSpec((0, 0, "0.5")), DPS)


@pytest.fixture(scope="module")
def eq_asym():
    # mild cubic tilt of a quartic; still one-cut with 0 in the bulk
    return solve_equilibrium(PotentialSpec((0, "0.1", "0.5", "0.05", "0.05")), DPS)


def test_semicircle_endpoints_and_density(eq_2x2):
    with workdps(DPS):
        assert abs(eq_2x2.a + 1) < TIGHT
        assert abs(eq_2x2.b - 1) < TIGHT
        assert len(eq_2x2.q_coeffs) == 1
        assert abs(eq_2x2.q_coeffs[0] - 2) < TIGHT
        assert abs(eq_2x2.phiV0 - 2 / mpmath.pi) < TIGHT
        x = mpf("0.3")
        semi = 2 * mpmath.sqrt(1 - x * x) / mpmath.pi
        assert abs(eq_2x2.phi_V(x) - semi) < TIGHT


def test_gue_scaling_endpoints(eq_half_x2):
    with workdps(DPS):
        assert abs(eq_half_x2.a + 2) < TIGHT
        assert abs(eq_half_x2.b - 2) < TIGHT
        assert abs(eq_half_x2.q_coeffs[0] - mpf("0.5")) < TIGHT


def test_even_potential_symmetry(eq_2x2):
    with workdps(DPS):
        assert abs(eq_2x2.a + eq_2x2.b) < TIGHT
        assert abs(eq_2x2.kappa - mpmath.pi / 2) < TIGHT


def test_mass_is_one(eq_2x2, eq_asym):
    with workdps(DPS):
        assert abs(eq_2x2.mass_residual) < mpf(10) ** (-DPS + 10)
        assert abs(eq_asym.mass_residual) < mpf(10) ** (-DPS + 10)


def test_kappa_mass_split(eq_asym):
    # pi*mu([a,0]) + pi*mu([0,b]) = pi
    with workdps(DPS):
        eqr = eq_asym
        left = mpmath.pi - eqr.kappa
        dens_panels = 200
        # Riemann-free check: integrate density over [a, 0] with the module quadrature
        from opdeform.quadrature import composite_quad, geometric_panels

        panels = geometric_panels(eqr.a, 0, "lo", mpf("1e-30")) + [(mpf(0), mpf(0))]
        panels = [p for p in panels if p[0] < p[1]]
        val = composite_quad(lambda x: eqr.phi_V(x), panels, m=40, dps=DPS)
        assert abs(mpmath.pi * val - left) < mpf("1e-25")
        assert 0 < eqr.kappa < mpmath.pi


def test_el_residual_zero_on_support(eq_2x2):
    with workdps(DPS):
        for x in ("-0.9", "-0.37", "0.0", "0.41", "0.88"):
            assert abs(eq_2x2.el_residual(mpf(x))) < mpf(10) ** (-DPS + 15)


def test_el_residual_zero_at_endpoint(eq_2x2):
    with workdps(DPS):
        assert abs(eq_2x2.el_residual(eq_2x2.b)) < mpf(10) ** (-DPS + 20)


def test_el_residual_positive_off_support(eq_2x2, eq_asym):
    with workdps(DPS):
        assert eq_2x2.el_residual(eq_2x2.b + 1) > mpf("0.1")
        for eqr in (eq_2x2, eq_asym):
            for x in (eqr.a - mpf("0.6"), eqr.b + mpf("0.25"), eqr.b + 2):
                r = eqr.el_residual(x)
                assert r > 0
                # edge integral route agrees with the log-potential route
                assert abs(eqr.edge_gap(x) - r) < mpf(10) ** (-DPS + 20)


def test_el_residual_dense_grid_nonnegative(eq_asym):
    with workdps(DPS):
        eqr = eq_asym
        lo, hi = eqr.a - 1, eqr.b + 1
        for i in range(41):
            x = lo + (hi - lo) * i / 40
            r = eqr.el_residual(x)
            if eqr.a <= x <= eqr.b:
                assert abs(r) < mpf(10) ** (-DPS + 15)
            else:
                assert r > -mpf(10) ** (-DPS + 15)


def test_asymmetric_invariants(eq_asym):
    with workdps(DPS):
        assert eq_asym.a < 0 < eq_asym.b
        assert abs(eq_asym.a + eq_asym.b) > mpf("1e-3")  # genuinely asymmetric
        xs = [eq_asym.a + (eq_asym.b - eq_asym.a) * i / 100 for i in range(101)]
        assert all(eq_asym.q(x) > 0 for x in xs)


def test_phi0_taylor_and_inverse(eq_2x2):
    with workdps(DPS):
        order = 12
        s = eq_2x2.phi0_series(order)
        # first coefficient is pi*phi_V(0) > 0
        assert abs(s[1] - mpmath.pi * eq_2x2.phiV0) < TIGHT
        # even potential => odd map: even Taylor coefficients vanish
        for k in range(0, order + 1, 2):
            assert abs(s[k]) < TIGHT
        inv = eq_2x2.phi0_inverse_series(order)
        comp = ser_compose(ser_trim(s, order), inv, order)
        assert abs(comp[1] - 1) < TIGHT
        for k in [0] + list(range(2, order + 1)):
            assert abs(comp[k]) < TIGHT
        # numeric composition check phi0^{-1}(phi0(x)) = x (to truncation order)
        for xs in ("0.01", "-0.02"):
            x = mpf(xs)
            w = ser_eval(s, x)
            assert abs(ser_eval(inv, w) - x) < abs(2 * w) ** (order + 1)


def test_phi0_slope_matches_exact_semicircle(eq_2x2):
    # phi0(x) = integral_0^x 2 sqrt(1-t^2) = x sqrt(1-x^2) + asin(x)
    with workdps(DPS):
        s = eq_2x2.phi0_series(16)
        x = mpf("0.2")
        exact = x * mpmath.sqrt(1 - x * x) + mpmath.asin(x)
        assert abs(ser_eval(s, x) - exact) < mpf("1e-14")


def test_effective_params(eq_2x2):
    with workdps(DPS):
        T, u = effective_params(eq_2x2, 1)
        assert abs(T - 2) < TIGHT
        assert abs(u - mpf("0.25")) < TIGHT
        T4, _ = effective_params(eq_2x2, 4)
        assert abs(T4 - T / 2) < TIGHT
        for t in ("0.5", "1", "3"):
            Tt, ut = effective_params(eq_2x2, mpf(t))
            assert abs(ut * Tt * Tt - 1) < TIGHT
    with pytest.raises(DomainError):
        effective_params(eq_2x2, 0)


def test_rejects_bad_potentials():
    with pytest.raises(DomainError):
        PotentialSpec((0, 1, 0, 2))  # odd degree
    with pytest.raises(DomainError):
        PotentialSpec((0, 0, -1, 0, 0))  # zero leading after trim? negative leading
    with pytest.raises(DomainError):
        # origin far outside the bulk: V centered at x = 10
        solve_equilibrium(PotentialSpec((100, -20, 1)), DPS)

"""Polylog/Laplace/prediction engine against dual routes and hand values."""

import mpmath
import pytest
from mpmath import mpf

from opdeform.asymptotics import (
    G0,
    G_beta,
    G_beta_closed,
    build_predictions,
    h0_finite_n,
    hhat_coeffs,
    laplace_expand,
    laplace_quadrature,
    li_halfint,
    li_three_half,
    predict_deformed,
    predict_ground,
)
from opdeform.equilibrium import PotentialSpec, solve_equilibrium
from opdeform.errors import DomainError
from opdeform.precision import workdps

DPS = 60


@pytest.fixture(scope="module")
def eq():
    return solve_equilibrium(PotentialSpec((0, 0, 2)), DPS)


def test_li_at_zero_and_minus_one():
    with workdps(DPS):
        assert li_three_half(0) == 0
        # eta-function identity: Li_{3/2}(-1) = -(1 - 2^{-1/2}) zeta(3/2)
        want = -(1 - 1 / mpmath.sqrt(2)) * mpmath.zeta(mpf(3) / 2)
        got = li_three_half(-1)
        assert abs(got - want) < mpf("1e-12")
        assert abs(got + mpf("0.765147")) < mpf("1e-6")


@pytest.mark.parametrize("x", ["-1", "-0.9999", "-0.5", "-0.037"])
@pytest.mark.parametrize("twice_sigma", [3, 5, 7])
def test_li_against_mpmath(x, twice_sigma):
    with workdps(DPS):
        x = mpf(x)
        got = li_halfint(twice_sigma, x, DPS)
        want = mpmath.polylog(mpf(twice_sigma) / 2, x)
        assert abs(got - want) < mpf(10) ** (-DPS + 12)


def test_li_domain():
    with pytest.raises(DomainError):
        li_three_half(mpf("0.5"))
    with pytest.raises(DomainError):
        li_three_half(mpf("-1.01"))


def test_g0_two_routes():
    with workdps(DPS):
        for s in (0, 1, 5):
            series = G0(mpf(s), DPS)
            quad = G_beta(0, mpf(s), DPS)
            assert abs(series - quad) < mpf("1e-40")
        assert abs(G0(0, DPS) - mpf("1.3561878")) < mpf("1e-6")


def test_g0_negative_s_and_continuity():
    with workdps(DPS):
        left = G0(mpf("-1e-25"), DPS)
        right = G0(mpf("1e-25"), DPS)
        assert abs(left - right) < mpf("1e-24")
        # deep negative s: integrand ~ (-s - x^2) on the plateau
        s = mpf(-9)
        got = G0(s, DPS)
        assert got > 2 * mpf(9) ** mpf("0.5") * 9 / 2  # crude plateau lower bound


def test_g0_large_s_ratio_and_monotone():
    with workdps(DPS):
        vals = [G0(mpf(s), DPS) for s in (0, 1, 2, 5, 10, 20)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        for s in (20, 30):
            ratio = G0(mpf(s), DPS) / (mpmath.sqrt(mpmath.pi) * mpmath.exp(-mpf(s)))
            assert abs(ratio - 1) < 2 * mpmath.exp(-mpf(s) / 1)


def test_g_beta_odd_zero_and_beta0():
    with workdps(DPS):
        assert G_beta(3, mpf("0.5"), DPS) == 0
        assert abs(G_beta(0, mpf("1.5"), DPS) - G0(mpf("1.5"), DPS)) < mpf("1e-40")


def test_g_beta_closed_form_routes():
    with workdps(DPS):
        # beta=2, y=0: quadrature matches -(1/2) Gamma(1/2) Li_{5/2}(-1)
        quad = G_beta(2, 0, DPS)
        closed = -mpmath.gamma(mpf(1) / 2) / 2 * mpmath.polylog(mpf(5) / 2, -1)
        assert abs(quad - closed) < mpf("1e-10")
        for beta in (0, 2, 4):
            for y in (0, 1, 5):
                a = G_beta(beta, mpf(y), DPS)
                b = G_beta_closed(beta, mpf(y), DPS)
                assert abs(a - b) < mpf("1e-10")


def test_laplace_pure_quadratic_is_exact_identity():
    with workdps(DPS):
        g = [mpf(2), mpf(0), mpf("0.7"), mpf(0), mpf("0.1")]
        exp_ = laplace_expand(g, [0, 0, 1], y=mpf(1), N=2, dps=DPS)
        # ghat == g: coefficients are g_{2k} G_{2k}(y) verbatim
        for k, c in enumerate(exp_.coeffs):
            want = g[2 * k] * G_beta(2 * k, mpf(1), DPS)
            assert abs(c - want) < mpf("1e-40")


def test_laplace_odd_density_vanishes():
    with workdps(DPS):
        exp_ = laplace_expand([0, 1, 0, mpf("0.3")], [0, 0, 1], y=0, N=2, dps=DPS)
        assert all(c == 0 for c in exp_.coeffs)


def test_laplace_quartic_order():
    # error after N terms decays like t^{-(N+3/2)}
    with workdps(DPS):
        g = [mpf(1), mpf("0.2"), mpf("0.1")]
        f = [0, 0, 1, mpf("0.3"), mpf("0.2")]
        window = (mpf(-1), mpf(1))
        N = 1
        exp_ = laplace_expand(g, f, y=mpf("0.5"), N=N, dps=DPS, window=window)
        errs = []
        ts = [mpf(100), mpf(1000)]
        for t in ts:
            oracle = laplace_quadrature(g, f, mpf("0.5"), t, window, DPS)
            errs.append(abs(oracle - exp_(t)))
        slope = mpmath.log(errs[1] / errs[0]) / mpmath.log(ts[1] / ts[0])
        assert abs(slope + (N + mpf(3) / 2)) < mpf("0.2")


def test_laplace_rejects_bad_exponent():
    with pytest.raises(DomainError):
        laplace_expand([1], [0, 1, 1], y=0, N=1, dps=DPS)  # f'(0) != 0
    with pytest.raises(DomainError):
        laplace_expand([1], [0, 0, -1], y=0, N=1, dps=DPS)  # f''(0) < 0
    with pytest.raises(DomainError):
        # second minimum in the window
        laplace_expand([1], [0, 0, 1, 0, -1], y=0, N=1, dps=DPS, window=(-2, 2))


def test_hhat_values(eq):
    with workdps(DPS):
        h0, h1, hhat = hhat_coeffs(eq, s=0, t=1, dps=DPS)
        assert abs(h0 - G0(0, DPS) / (2 * mpmath.pi)) < mpf("1e-45")
        # G0(0)/(2 pi) = 0.21584399...; assert to the 6 figures it rounds to
        assert abs(h0 - mpf("0.215844")) < mpf("1e-6")
        assert abs(h1) < mpf("1e-45")  # symmetric potential
        # decay like sqrt(pi) e^{-s} / (2 pi sqrt(|a| b t))
        for s in (25, 35):
            h0s, _, _ = hhat_coeffs(eq, s=s, t=1, dps=DPS)
            want = mpmath.sqrt(mpmath.pi) * mpmath.exp(-mpf(s)) / (2 * mpmath.pi)
            assert abs(h0s / want - 1) < mpf("1e-8")
        z = mpf(3)
        assert abs(hhat(z) - h0 * mpmath.sqrt(z * z - 1) / z) < mpf("1e-40")


def test_h0_finite_matches_limit(eq):
    # h0(n) is negative (log sigma < 0) and approaches -hhat0/n at rate n^-3
    with workdps(DPS):
        h0, _, _ = hhat_coeffs(eq, s=2, t=1, dps=DPS)
        errs = []
        for n in (32, 64):
            got = h0_finite_n(eq, (0, 0, 1), 2, n, DPS)
            assert got < 0
            errs.append(abs(got + h0 / n))
            assert errs[-1] < 10 * h0 / n**3
        assert errs[1] < errs[0] / 6  # n^-3 halving would give 1/8


def test_predict_ground(eq):
    with workdps(DPS):
        g, b = predict_ground(eq, 16)
        assert abs(g - mpf("0.25")) < mpf("1e-45")
        assert abs(b) < mpf("1e-45")


def test_predict_deformed_symmetric_structure(eq):
    with workdps(DPS):
        Q = mpf("-7e-4")
        for n in (16, 17, 32, 33):
            g, b = predict_deformed(eq, 1, 2, Q, n, DPS)
            # beta correction vanishes identically for the symmetric case
            assert abs(b) < mpf("1e-40")
            want = mpf("0.25") + Q * (-1) ** n / n
            assert abs(g - want) < mpf("1e-40")


def test_predict_deformed_approaches_ground(eq):
    with workdps(DPS):
        prev = None
        for s in (5, 10, 20, 30):
            Q = -mpmath.exp(-mpf(s) - 4) / (2 * mpmath.sqrt(mpmath.pi))
            g, b = predict_deformed(eq, 1, s, Q, 33, DPS)
            g0, b0 = predict_ground(eq, 33)
            dev = abs(g - g0) + abs(b - b0)
            if prev is not None:
                assert dev < prev
            prev = dev
        # s=30: below 1e-13/n
        assert dev < mpf("1e-13") / 33


def test_prediction_set(eq):
    with workdps(DPS):
        ps = build_predictions(eq, 1, 2, mpf("-6.78e-4"), (32, 48, 64))
        assert ps.ns == (32, 48, 64)
        assert len(ps.gamma_sq_deformed) == 3
        assert abs(ps.ingredients["T"] - 2) < mpf("1e-40")
        assert abs(ps.ingredients["kappa"] - mpmath.pi / 2) < mpf("1e-40")

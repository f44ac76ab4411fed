"""Recurrence/kernel layer against the Hermite closed form and trace identities."""

import mpmath
import pytest
from mpmath import mpf

from opdeform.equilibrium import PotentialSpec, solve_equilibrium
from opdeform.errors import DomainError, QuadratureError
from opdeform.orthopoly import (
    GROUND,
    DeformationSpec,
    EnsembleSpec,
    build_discretization,
    cd_kernel,
    compute_recurrence,
    kernel_sum,
    log_weight,
    quadrature_window,
    scaled_kernel,
)
from opdeform.precision import workdps

DPS = 60
V22 = PotentialSpec((0, 0, 2))


@pytest.fixture(scope="module")
def eq():
    return solve_equilibrium(V22, DPS)


@pytest.fixture(scope="module")
def hermite16(eq):
    return compute_recurrence(EnsembleSpec(V22, GROUND, 16), K=18, dps=DPS, eq=eq)


def test_hermite_closed_form(hermite16):
    # weight exp(-2 n x^2): gamma_k^2 = k/(4n) for every k
    with workdps(DPS):
        n = 16
        for k in range(1, hermite16.K + 1):
            exact = mpf(k) / (4 * n)
            assert abs(hermite16.gamma_sq[k - 1] - exact) / exact < mpf("1e-40")


def test_even_weight_beta_vanishes(hermite16):
    with workdps(DPS):
        assert max(abs(b) for b in hermite16.beta) < mpf(10) ** (-DPS + 15)


def test_gamma_positive(hermite16):
    assert all(g > 0 for g in hermite16.gamma_sq)


def test_norming_constants(hermite16):
    # 1/h_0^2 = integral of the weight = sqrt(pi/(2n))/... checked via m0
    with workdps(DPS):
        exact_m0 = mpmath.sqrt(mpmath.pi / (2 * 16))
        assert abs(hermite16.m0 - exact_m0) / exact_m0 < mpf("1e-45")
        assert abs(hermite16.h_sq[0] - 1 / exact_m0) * exact_m0 < mpf("1e-45")


def test_log_weight_examples():
    with workdps(DPS):
        d = DeformationSpec((0, 0, 1), mpf(0))
        spec = EnsembleSpec(V22, d, 10)
        # x=0: log sigma = -log(1+e^{-s}), Q(0)=0
        got = log_weight(spec, 0)
        assert abs(got + mpmath.log(2)) < mpf("1e-55")  # s=0, V(0)=0
        # n=10, s=0, x=0.1: n^2 Q = 1, sigma = 1/(1+e^{-1})
        got = log_weight(spec, mpf("0.1"))
        expect = -mpmath.log(1 + mpmath.exp(-1)) - 10 * V22(mpf("0.1"))
        assert abs(got - expect) < mpf("1e-55")
        # ground: log w = -n V
        g = EnsembleSpec(V22, GROUND, 10)
        assert abs(log_weight(g, mpf("0.3")) + 10 * V22(mpf("0.3"))) < mpf("1e-55")
        # sigma < 1 still visible at moderate exponent
        assert log_weight(spec, mpf("0.5")) < -10 * V22(mpf("0.5"))
        # r < 0 branch: s very negative makes log sigma ~ r
        dneg = DeformationSpec((0, 0, 1), mpf(-50))
        sneg = EnsembleSpec(V22, dneg, 1)
        r = mpf(-50) + 1 * dneg.Q(mpf("0.1"))
        expect = r - mpmath.log(1 + mpmath.exp(r)) - 1 * V22(mpf("0.1"))
        assert abs(log_weight(sneg, mpf("0.1")) - expect) < mpf("1e-55")


def test_window_contains_spec_minimum_set(eq):
    # {x: n(V - min V) <= (D+10) ln 10} must lie inside the working window
    with workdps(DPS):
        n = 24
        xlo, xhi = quadrature_window(eq, n, DPS)
        lim = mpmath.sqrt((DPS + 10) * mpmath.log(10) / (2 * n))  # V=2x^2, minV=0
        assert xlo < -lim and xhi > lim
        assert xlo < eq.a and xhi > eq.b


def test_deformed_matches_ground_at_large_s(eq):
    with workdps(DPS):
        n = 20
        ground = compute_recurrence(EnsembleSpec(V22, GROUND, n), K=n + 2, dps=DPS, eq=eq)
        deformed = compute_recurrence(
            EnsembleSpec(V22, DeformationSpec((0, 0, 1), mpf(30)), n), K=n + 2, dps=DPS, eq=eq
        )
        dmax = max(abs(a - b) for a, b in zip(ground.gamma_sq, deformed.gamma_sq))
        assert dmax < mpf("1e-10")
        assert dmax > mpf("1e-17")  # the deformation is not lost either


def test_monotone_deformation_effect(eq):
    with workdps(DPS):
        n = 12
        K = n + 2
        ground = compute_recurrence(EnsembleSpec(V22, GROUND, n), K=K, dps=DPS, eq=eq)
        devs = []
        for s in (0, 2, 5, 10, 30):
            tab = compute_recurrence(
                EnsembleSpec(V22, DeformationSpec((0, 0, 1), mpf(s)), n), K=K, dps=DPS, eq=eq
            )
            devs.append(max(abs(a - b) for a, b in zip(ground.gamma_sq, tab.gamma_sq)))
        assert all(devs[i] > devs[i + 1] for i in range(len(devs) - 1))


def test_kernel_symmetry_and_sum_form(hermite16):
    with workdps(DPS):
        spec = EnsembleSpec(V22, GROUND, 16)
        x, y = mpf("0.13"), mpf("-0.42")
        kxy = cd_kernel(hermite16, spec, x, y)
        kyx = cd_kernel(hermite16, spec, y, x)
        assert abs(kxy - kyx) < mpf("1e-45") * abs(kxy)
        ks = kernel_sum(hermite16, spec, x, y)
        assert abs(kxy - ks) < mpf("1e-40") * abs(kxy)


def test_kernel_diagonal_confluent(hermite16):
    with workdps(DPS):
        spec = EnsembleSpec(V22, GROUND, 16)
        x = mpf("0.2")
        diag = cd_kernel(hermite16, spec, x, x)
        near = cd_kernel(hermite16, spec, x, x + mpf("1e-25"))
        assert abs(diag - near) < mpf("1e-20") * abs(diag)
        assert diag > 0


def test_single_particle_kernel(eq):
    with workdps(DPS):
        spec = EnsembleSpec(V22, GROUND, 1)
        tab = compute_recurrence(spec, K=3, dps=DPS, eq=eq)
        x, y = mpf("0.4"), mpf("-0.3")
        expect = mpmath.exp((log_weight(spec, x) + log_weight(spec, y)) / 2) / tab.m0
        got = cd_kernel(tab, spec, x, y)
        assert abs(got - expect) < mpf("1e-45") * abs(expect)


def test_trace_equals_n(eq):
    # integral of K_n(x,x) over the window = n, via an independent rule
    with workdps(DPS):
        n = 8
        spec = EnsembleSpec(V22, GROUND, n)
        tab = compute_recurrence(spec, K=n + 2, dps=DPS, eq=eq)
        disc = build_discretization(spec, eq, n + 2, DPS, guard=32, point_factor=1.35)
        tr = mpmath.fsum(
            w * cd_kernel(tab, spec, x, x) for x, w in zip(disc.nodes, disc.weights)
        )
        assert abs(tr - n) < mpf("1e-20")


def test_projection_property(eq):
    # integral K(x,y) K(y,z) dy = K(x,z)
    with workdps(DPS):
        n = 8
        spec = EnsembleSpec(V22, GROUND, n)
        tab = compute_recurrence(spec, K=n + 2, dps=DPS, eq=eq)
        disc = build_discretization(spec, eq, n + 2, DPS, guard=32, point_factor=1.35)
        for (x, z) in ((mpf("0.1"), mpf("-0.2")), (mpf("0.5"), mpf("0.5"))):
            lhs = mpmath.fsum(
                w * cd_kernel(tab, spec, x, y) * cd_kernel(tab, spec, y, z)
                for y, w in zip(disc.nodes, disc.weights)
            )
            rhs = cd_kernel(tab, spec, x, z)
            assert abs(lhs - rhs) < mpf("1e-20") * max(1, abs(rhs))


def test_scaled_kernel_positive_diagonal(hermite16, eq):
    with workdps(DPS):
        spec = EnsembleSpec(V22, GROUND, 16)
        v = scaled_kernel(hermite16, spec, eq, mpf("0.7"), mpf("0.7"))
        assert v > 0


def test_ground_sine_shape(eq):
    # moderate-n sanity: rescaled kernel within a few percent of sin(d)/(pi d)
    with workdps(DPS):
        n = 48
        spec = EnsembleSpec(V22, GROUND, n)
        tab = compute_recurrence(spec, K=n + 2, dps=DPS, eq=eq)
        zeta, xi = mpf("0.9"), mpf("-0.4")
        got = scaled_kernel(tab, spec, eq, zeta, xi)
        d = zeta - xi
        sine = mpmath.sin(d) / (mpmath.pi * d)
        assert abs(got - sine) < mpf("0.05") * abs(sine)


def test_recompute_at_higher_precision(eq, hermite16):
    with workdps(DPS + 20):
        eq80 = solve_equilibrium(V22, DPS + 20)
        tab80 = compute_recurrence(EnsembleSpec(V22, GROUND, 16), K=18, dps=DPS + 20, eq=eq80)
        for a, b in zip(hermite16.gamma_sq, tab80.gamma_sq):
            assert abs(a - b) / abs(b) < mpf(10) ** (-(DPS - 10))


def test_error_contracts(eq):
    spec = EnsembleSpec(V22, GROUND, 8)
    with pytest.raises(QuadratureError, match="nodes"):
        compute_recurrence(spec, K=10, dps=DPS, eq=eq, max_nodes=100)
    with pytest.raises(DomainError):
        compute_recurrence(spec, K=0, dps=DPS, eq=eq)
    with pytest.raises(DomainError):
        DeformationSpec((0, 1, 1), 2)  # Q'(0) != 0
    with pytest.raises(DomainError):
        DeformationSpec((0, 0, -1), 2)  # t <= 0
    with pytest.raises(DomainError):
        # profile goes negative inside the window
        bad = DeformationSpec((0, 0, 1, 0, "-0.3"), 2)
        compute_recurrence(EnsembleSpec(V22, bad, 12), K=14, dps=DPS, eq=eq)


def test_default_degree_is_n_plus_2(eq):
    tab = compute_recurrence(EnsembleSpec(V22, GROUND, 6), dps=DPS, eq=eq)
    assert tab.K == 8

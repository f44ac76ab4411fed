"""Truncated series calculus: algebraic roundtrips and the reversion contract."""

import mpmath
import pytest
from mpmath import mpf

from opdeform.errors import DomainError
from opdeform.precision import workdps
from opdeform.series import (
    polyval,
    ser_compose,
    ser_deriv,
    ser_div,
    ser_eval,
    ser_integ,
    ser_mul,
    ser_revert,
    ser_sqrt,
    ser_sub,
    ser_trim,
)

DPS = 60


def _exp_series(order):
    out = [mpf(1)]
    for k in range(1, order + 1):
        out.append(out[-1] / k)
    return out


def test_mul_div_roundtrip():
    with workdps(DPS):
        a = [mpf(2), mpf(-1), mpf("0.5"), mpf(3)]
        b = [mpf(1), mpf(4), mpf(-2), mpf("0.25")]
        q = ser_div(ser_mul(a, b), b)
        for x, y in zip(q, a):
            assert abs(x - y) < mpf(10) ** (-DPS + 5)


def test_sqrt_squares_back():
    with workdps(DPS):
        a = [mpf(4), mpf(1), mpf(-3), mpf("0.7"), mpf(2)]
        r = ser_sqrt(a)
        for x, y in zip(ser_mul(r, r), a):
            assert abs(x - y) < mpf(10) ** (-DPS + 5)


def test_deriv_integ_roundtrip():
    with workdps(DPS):
        a = [mpf(0), mpf(3), mpf(-2), mpf(5)]
        back = ser_integ(ser_deriv(a))
        for x, y in zip(back, a):
            assert abs(x - y) < mpf(10) ** (-DPS + 5)


def test_compose_exp_log():
    with workdps(DPS):
        order = 12
        e = _exp_series(order)
        # log(1+x) series
        lg = [mpf(0)] + [(-1) ** (k + 1) * mpf(1) / k for k in range(1, order + 1)]
        comp = ser_compose(e, lg, order)  # exp(log(1+x)) = 1 + x
        assert abs(comp[0] - 1) < mpf(10) ** (-DPS + 5)
        assert abs(comp[1] - 1) < mpf(10) ** (-DPS + 5)
        for c in comp[2:]:
            assert abs(c) < mpf(10) ** (-DPS + 5)


def test_reversion_contract():
    with workdps(DPS):
        order = 10
        a = [mpf(0), mpf(2), mpf("0.3"), mpf("-0.1"), mpf("0.05")]
        a = ser_trim(a, order)
        inv = ser_revert(a, order)
        comp = ser_compose(a, inv, order)
        # a(inv(x)) = x + O(x^{order+1})
        assert abs(comp[1] - 1) < mpf(10) ** (-DPS + 5)
        for k in [0] + list(range(2, order + 1)):
            assert abs(comp[k]) < mpf(10) ** (-DPS + 5)
        # numeric spot check
        x = mpf("0.01")
        assert abs(ser_eval(inv, ser_eval(a, x)) - x) < mpf("1e-22")


def test_reversion_rejects_bad_input():
    with pytest.raises(DomainError):
        ser_revert([mpf(1), mpf(2)])
    with pytest.raises(DomainError):
        ser_revert([mpf(0), mpf(0), mpf(1)])


def test_polyval_horner():
    with workdps(DPS):
        assert polyval([mpf(1), mpf(0), mpf(2)], mpf(3)) == 19

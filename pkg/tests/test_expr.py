import math

import numpy as np
import pytest

from hetflux import expr as E


def test_parse_and_evaluate_polynomial():
    f = E.parse("x*u^2 + u^4").compile(("x", "u"))
    assert f(2.0, 3.0) == pytest.approx(2 * 9 + 81)


def test_precedence_and_unary_minus():
    f = E.parse("-u^2").compile(("u",))
    assert f(3.0) == -9.0
    g = E.parse("2*x+3*x^2").compile(("x",))
    assert g(2.0) == 16.0


def test_exp_and_abs():
    f = E.parse("exp(x)*abs(u)^1.5").compile(("x", "u"))
    assert f(1.0, -4.0) == pytest.approx(math.e * 8.0)


def test_negative_exponent():
    f = E.parse("abs(x)^-0.5").compile(("x",))
    assert f(4.0) == pytest.approx(0.5)


def test_derivative_matches_finite_difference():
    e = E.parse("x^2*u^3 + exp(x)*u")
    fu = e.diff("u").compile(("x", "u"))
    fx = e.diff("x").compile(("x", "u"))
    f = e.compile(("x", "u"))
    x, u, h = 0.7, -1.3, 1e-6
    assert fu(x, u) == pytest.approx((f(x, u + h) - f(x, u - h)) / (2 * h), rel=1e-7)
    assert fx(x, u) == pytest.approx((f(x + h, u) - f(x - h, u)) / (2 * h), rel=1e-7)


def test_free_vars():
    assert E.parse("x*u").free_vars() == {"x", "u"}
    assert E.parse("3").free_vars() == set()


def test_vectorised():
    f = E.parse("x*u^2").compile(("x", "u"))
    out = f(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_allclose(out, [9.0, 32.0])


@pytest.mark.parametrize("bad", ["x +", "x ** 2", "foo(x)", "(x", "x/2", ""])
def test_rejects_invalid(bad):
    with pytest.raises(E.ExprError):
        E.parse(bad)


def test_roundtrip_through_string():
    e = E.parse("x*u^2 + u^4")
    again = E.parse(str(e))
    f1, f2 = e.compile(("x", "u")), again.compile(("x", "u"))
    assert f1(1.3, -0.4) == pytest.approx(f2(1.3, -0.4))

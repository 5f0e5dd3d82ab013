import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetflux.flux import (FAILS, HOLDS, BranchError, FluxError, FluxModel, InfeasibleBranchError,
                          InterfaceCrossingError, NotMultiplicativeError, branch_for_level,
                          stationary_branch, validate_assumptions)

CATALOG_FLUXES = [
    FluxModel.multiplicative("x", "u^2"),
    FluxModel.multiplicative("x^2", "u^2"),
    FluxModel.multiplicative("x", "abs(u)^1.5"),
    FluxModel.multiplicative("x", "abs(u)^3"),
    FluxModel.general("x*u^2 + u^4"),
]


@settings(max_examples=100, deadline=None)
@given(i=st.integers(0, len(CATALOG_FLUXES) - 1), x=st.floats(-3, 3), u=st.floats(-3, 3))
def test_symbolic_derivatives_match_central_differences(i, x, u):
    m = CATALOG_FLUXES[i]
    # keep the stencil away from the kink of abs(u)^s at u = 0
    h = max(1e-5 * min(1.0, abs(u)), 1e-12)
    fd_u = (m.f(x, u + h) - m.f(x, u - h)) / (2 * h)
    fd_x = (m.f(x + h, u) - m.f(x - h, u)) / (2 * h)
    assert abs(m.fu(x, u) - fd_u) <= 1e-6 * (1 + abs(m.fu(x, u)))
    assert abs(m.fx(x, u) - fd_x) <= 1e-6 * (1 + abs(m.fx(x, u)))
    if m.is_multiplicative and abs(u) > 1e-2:
        fd_hh = (m.dh(u + h) - m.dh(u - h)) / (2 * h)
        assert abs(m.d2h(u) - fd_hh) <= 1e-6 * (1 + abs(m.d2h(u)))


@settings(max_examples=100, deadline=None)
@given(F=st.floats(1e-3, 1e3), x=st.floats(1e-3, 10), sign=st.sampled_from([-1, 1]),
       s=st.sampled_from([1.5, 2.0, 3.0]))
def test_branch_inversion_round_trip(F, x, sign, s):
    m = FluxModel.multiplicative("x", "u^2" if s == 2 else f"abs(u)^{s}")
    b = stationary_branch(m, F, sign, (0.0, math.inf))
    u = float(b(x))
    assert np.sign(u) == sign
    assert float(m.g(x) * m.h(u)) == pytest.approx(F, rel=1e-10)


def test_branch_inversion_general_h_uses_root_finder():
    m = FluxModel.multiplicative("x", "u^2 + u^4")
    b = stationary_branch(m, 2.0, -1, (0.0, math.inf))
    xs = np.array([0.1, 1.0, 5.0])
    np.testing.assert_allclose(m.g(xs) * m.h(b(xs)), 2.0, rtol=1e-10)


def test_branch_closed_form_flipping():
    m = FluxModel.multiplicative("x", "u^2")
    b = stationary_branch(m, 1.0, 1, (0.0, math.inf))
    np.testing.assert_allclose(b(np.array([0.25, 4.0])), [2.0, 0.5], rtol=1e-13)
    assert b.limit(0.0) == math.inf


def test_shell_integrals_of_branch_are_cauchy():
    # |u| = x^{-1/2} on (0, 1]: dyadic shell integrals shrink geometrically
    from scipy.integrate import quad

    m = FluxModel.multiplicative("x", "u^2")
    b = stationary_branch(m, 1.0, 1, (0.0, math.inf))
    shells = [quad(lambda x: abs(float(b(x))), 2.0 ** -(k + 1), 2.0 ** -k)[0] for k in range(12)]
    ratios = np.array(shells[1:]) / np.array(shells[:-1])
    assert np.all(ratios < 1)
    assert sum(shells) == pytest.approx(2.0 * (1 - 2 ** -6), rel=1e-8)


def test_branch_rejects_interior_zero_of_g():
    m = FluxModel.multiplicative("x", "u^2")
    with pytest.raises(InterfaceCrossingError):
        stationary_branch(m, 1.0, 1, (-1.0, 1.0))


def test_branch_rejects_infeasible_level():
    m = FluxModel.multiplicative("x", "u^2")
    with pytest.raises(InfeasibleBranchError):
        stationary_branch(m, -1.0, 1, (0.0, 5.0))
    with pytest.raises(InfeasibleBranchError):
        stationary_branch(m, 0.0, 1, (0.0, 5.0))
    with pytest.raises(BranchError):
        stationary_branch(m, 1.0, 1, (2.0, 1.0))


def test_branch_for_level_signs():
    m = FluxModel.multiplicative("x", "u^2")
    left = branch_for_level(m, 1.0, (-math.inf, 0.0))
    right = branch_for_level(m, 1.0, (0.0, math.inf))
    # sgn(u) = sgn(F) sgn(g)
    assert float(left(-4.0)) == pytest.approx(-0.5)
    assert float(right(4.0)) == pytest.approx(0.5)
    assert float(m.signed_flux(-4.0, -0.5)) == pytest.approx(1.0)
    assert float(m.signed_flux(4.0, 0.5)) == pytest.approx(1.0)


def test_validate_flipping_flux():
    rep = validate_assumptions(FluxModel.multiplicative("x", "u^2"))
    assert rep.ok(), rep.to_dict()
    assert rep.eta == 1
    assert rep.growth_exponent is not None and rep.growth_exponent > rep.eta


def test_validate_quadratic_g_fails_growth():
    rep = validate_assumptions(FluxModel.multiplicative("x^2", "u^2"))
    assert rep.status("CG") == FAILS
    assert "CG" in rep.failed()


def test_validate_power_flux_fails_regularity():
    rep = validate_assumptions(FluxModel.multiplicative("x", "abs(u)^1.5"))
    assert rep.status("R") == FAILS


def test_validate_general_flux_not_multiplicative():
    m = FluxModel.general("x*u^2 + u^4")
    rep = validate_assumptions(m)
    assert not rep.multiplicative and not rep.ok()
    with pytest.raises(NotMultiplicativeError):
        m.require_multiplicative()


@pytest.mark.parametrize("m", CATALOG_FLUXES[:2])
def test_validation_is_fast(m):
    t0 = time.perf_counter()
    validate_assumptions(m)
    assert time.perf_counter() - t0 < 1.0


def test_spec_round_trip():
    m = FluxModel.from_spec({"kind": "multiplicative", "g": "x", "h": "u^2"})
    again = FluxModel.from_spec(m.to_spec())
    assert again.f(1.5, -2.0) == m.f(1.5, -2.0)
    with pytest.raises(FluxError):
        FluxModel.from_spec({"kind": "multiplicative", "g": "x"})
    with pytest.raises(FluxError):
        FluxModel.multiplicative("u", "u^2")


def test_interface_distance():
    m = FluxModel.multiplicative("x^2 + -1", "u^2")
    assert m.interface_distance(0.0) == pytest.approx(1.0)
    assert m.interface_distance(1.25) == pytest.approx(0.25)

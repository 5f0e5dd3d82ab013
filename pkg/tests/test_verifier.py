import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hetflux import catalog as C
from hetflux.fields import ClosedFormField, constant
from hetflux.flux import FluxModel
from hetflux.fronttracking import solve
from hetflux.verifier import (EQUALITY, FAIL, HYPOTHESIS_FAILED, NOT_APPLICABLE, PASS, TestFunction,
                              bump, bump_integral, entropy_battery, entropy_residual, flux_balance,
                              interface_condition, k_grid, probe_lattice, rh_residual, stability_check,
                              weak_solution_diagnostics)

FLIP = FluxModel.multiplicative("x", "u^2")
BOX = {"kind": "piecewise", "pieces": [{"lo": -1, "hi": 1, "u": -1}]}


def _bump_and_slope(s):
    if abs(s) >= 1:
        return 0.0, 0.0
    b = math.exp(1 - 1 / (1 - s * s))
    return b, b * (-2 * s / (1 - s * s) ** 2)


def _oracle(field, model, k, phi, points=lambda t: ()):
    """Direct nested scipy quadrature of the Kruzkov functional (no initial term)."""
    def inner(t):
        def g(x):
            u = float(field.evaluate(np.array([x]), t)[0])
            s = 1.0 if u >= k else -1.0
            px, dpx = _bump_and_slope((x - phi.x0) / phi.rx)
            pt, dpt = _bump_and_slope((t - phi.t0) / phi.rt)
            dpx, dpt = dpx / phi.rx, dpt / phi.rt
            return (abs(u - k) * px * dpt + s * (model.f(x, u) - model.f(x, k)) * dpx * pt
                    - s * model.fx(x, k) * px * pt)
        a, b = phi.x_support
        pts = [p for p in points(t) if a < p < b]
        return quad(g, a, b, points=pts or None, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    a, b = phi.t_support
    return quad(inner, a, b, limit=100, epsabs=1e-11, epsrel=1e-9)[0]


def test_bump_integral_matches_scipy():
    ref = quad(lambda s: math.exp(1 - 1 / (1 - s * s)), -1, 1, epsabs=1e-14)[0]
    assert bump_integral() == pytest.approx(ref, rel=1e-12)
    phi = TestFunction(0.0, 1.0, 0.5, 0.25)
    assert phi.mass == pytest.approx(0.125 * ref**2, rel=1e-12)
    with pytest.raises(ValueError):
        TestFunction(0.0, 1.0, 0.0, 1.0)


def test_wrong_sign_step_residual():
    # u = 0 | 1 at x = 1, held fixed in time: not entropic for k between the states
    fld = ClosedFormField(FLIP, [lambda t: 1.0], [constant(0.0), constant(1.0)], stationary=True)
    phi = TestFunction(1.0, 0.5, 0.5, 0.4)
    ref = _oracle(fld, FLIP, 0.5, phi, points=lambda t: (1.0,))
    got = entropy_residual(fld, FLIP, 0.5, phi)
    assert got == pytest.approx(ref, rel=1e-7)
    # frozen value from the independent oracle above
    assert got == pytest.approx(-0.38704090331763935, rel=1e-9)
    assert got < 0


def test_moving_shock_residual_matches_oracle():
    e = C.shock_nonunique_family(0.0)
    phi = TestFunction(1.0, 1.0, 0.5, 0.5)
    y = e.curves["shock"].y
    for k in (-0.5, 0.0, 1.2):
        ref = _oracle(e.field, e.model, k, phi, points=lambda t: (float(y(t)),))
        assert entropy_residual(e.field, e.model, k, phi) == pytest.approx(ref, rel=1e-6, abs=1e-9)


def test_initial_term_included():
    # constant u = 1 with f = u^2/2 is an exact solution: the residual (with the initial term) vanishes
    m = FluxModel.multiplicative("1", "0.5*u^2")
    fld = ClosedFormField(m, [], [constant(1.0)], horizon=2.0)
    phi = TestFunction(0.0, 0.2, 0.5, 0.5)
    assert abs(entropy_residual(fld, m, 0.3, phi)) <= 1e-9 * phi.mass


class _Scaled(TestFunction):
    __test__ = False

    def bx(self, x):
        return 2.5 * super().bx(x)

    def dbx(self, x):
        return 2.5 * super().dbx(x)


def test_residual_linear_in_phi():
    e = C.power_family(2.0)
    phi = TestFunction(0.8, 1.0, 0.4, 0.5)
    scaled = _Scaled(0.8, 1.0, 0.4, 0.5)
    for k in (-1.0, 0.5):
        a = entropy_residual(e.field, e.model, k, phi)
        b = entropy_residual(e.field, e.model, k, scaled)
        assert b == pytest.approx(2.5 * a, rel=1e-10, abs=1e-14)


@settings(max_examples=10, deadline=None)
@given(x0=st.floats(-0.5, 2.5), t0=st.floats(0.6, 2.4), k=st.floats(-2, 2))
def test_quadrature_refinement_stable(x0, t0, k):
    e = C.shock_nonunique_family(0.5)
    fine = TestFunction(x0, t0, 0.5, 0.5)
    coarse = TestFunction(x0, t0, 0.5, 0.5, panels=fine.panels // 2, t_panels=fine.t_panels // 2)
    tol = 1e-6 * fine.mass
    diff = abs(entropy_residual(e.field, e.model, k, fine) - entropy_residual(e.field, e.model, k, coarse))
    assert diff < 0.1 * tol


def test_stationary_equality_battery():
    e = C.stat_equality()
    rep = entropy_battery(e.field, e.model, e.domain, ks=[-2, -1, 0, 1, 2], n_phi=9)
    assert rep.verdict == EQUALITY
    assert len(rep.probes) == 45


def test_battery_threads_agree():
    e = C.power_family(2.0)
    a = entropy_battery(e.field, e.model, e.domain, ks=[0.0, 1.0], n_phi=4, threads=1)
    b = entropy_battery(e.field, e.model, e.domain, ks=[0.0, 1.0], n_phi=4, threads=4)
    assert [r["residual"] for r in a.probes] == [r["residual"] for r in b.probes]


def test_battery_detects_non_entropic_field():
    fld = ClosedFormField(FLIP, [lambda t: 1.0], [constant(0.0), constant(1.0)], stationary=True)
    rep = entropy_battery(fld, FLIP, ((0.5, 1.5), (0.0, 1.0)), ks=[0.5], n_phi=4)
    assert rep.verdict == FAIL and not rep.passed


def test_probe_lattice_and_k_grid():
    dom = ((-1.0, 3.0), (0.0, 3.5))
    probes = probe_lattice(dom, 25)
    assert len(probes) == 25
    for p in probes:
        assert p.x_support[0] >= -1.0 - 1e-12 and p.x_support[1] <= 3.0 + 1e-12
        assert p.t_support[0] >= -1e-12 and p.t_support[1] <= 3.5 + 1e-12
    j1 = probe_lattice(dom, 9, seed=3)
    j2 = probe_lattice(dom, 9, seed=3)
    assert j1 == j2 and j1 != probe_lattice(dom, 9)
    ks = k_grid(C.stat_equality().field, dom)
    assert 0.0 in ks and ks == sorted(ks)


def test_interface_condition_on_family():
    assert interface_condition(C.shock_nonunique_family("stationary").field, FLIP, (1.0, 2.0)).verdict == PASS
    for lam in (0.0, 0.5, 1.0):
        e = C.shock_nonunique_family(lam)
        assert interface_condition(e.field, FLIP, e.t_samples).verdict == FAIL


@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_power_family_rh(s):
    e = C.power_family(s)
    c = e.curves["shock"]
    t, y, dy = c.samples(60)
    m = t > 1e-3
    res = rh_residual(e.field, e.model, (t[m], y[m]), ydot=dy[m])
    assert res.residual <= 1e-8 and res.skipped == 0


def test_rh_residual_from_differences():
    e = C.bounded_blowup()
    t = np.linspace(0.0, 1.9, 200)
    y = -((t - 2) ** 2) / 4
    assert rh_residual(e.field, e.model, (t, y)).residual <= 1e-8


def test_weak_solution_diagnostics_bad_data():
    e = C.bad_data_no_weak()
    rep = weak_solution_diagnostics(e.field, e.model, 1.0, 1.0)
    traces = {r["x"]: r["flux_trace_integral"] for r in rep.details["flux_traces"]}
    assert traces[0.001] == pytest.approx(1.0, abs=1e-6)
    for d in rep.details["integral_evolution"]:
        assert d["deviation"] == pytest.approx(d["t"], abs=1e-6)
    assert rep.verdict == FAIL


def test_weak_solution_not_applicable():
    m = FluxModel.multiplicative("x^2", "u^2")
    fld = ClosedFormField(m, [], [constant(0.0)])
    assert weak_solution_diagnostics(fld, m, 1.0, 1.0).verdict == NOT_APPLICABLE


def test_stability_pass_and_precheck():
    a = solve(FLIP, BOX, 0.2, 0.5, window=(-2, 2))
    b = solve(FLIP, {"kind": "piecewise", "pieces": [{"lo": -1, "hi": 1, "u": -1.1}]}, 0.2, 0.5, window=(-2, 2))
    rep = stability_check(a, b, 0.0, math.inf, 0.5)
    assert rep.verdict == PASS
    assert rep.details["l1_final"] <= rep.details["l1_initial"] + 2.0
    bad = C.shock_nonunique_family(0.0).field
    bad.delta = 0.0
    assert stability_check(bad, bad, 0.0, math.inf, 2.0).verdict == HYPOTHESIS_FAILED


def test_flux_balance_on_catalog_fields():
    e = C.shock_nonunique_family(0.0)
    assert abs(flux_balance(e.field, e.model, 0.1, 0.5, 0.2, 2.0)) < 1e-9

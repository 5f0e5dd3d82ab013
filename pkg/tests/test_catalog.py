import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hetflux import catalog as C
from hetflux.characteristics import VALUE_BLOWUP, POSITION_BLOWUP, integrate_characteristic
from hetflux.serialize import dumps
from hetflux.verifier import PASS


def test_names_and_lookup():
    assert len(C.names()) == 8
    for name in C.names():
        e = C.entry(name)
        assert e.name == name and e.description
    with pytest.raises(C.CatalogError):
        C.entry("nope")
    assert C.entry("power_family", s=3.0).params == {"s": 3.0}
    assert C.entry("shock_nonunique_family", 0.5).params == {"lambda": 0.5}
    with pytest.raises(ValueError):
        C.power_family(1.0)
    with pytest.raises(ValueError):
        C.shock_nonunique_family(-1.0)


@pytest.mark.parametrize("name", C.NAMES)
def test_cross_validate_every_entry(name):
    rep = C.cross_validate(C.entry(name), n_phi=9)
    assert rep.verdict == PASS, [r for r in rep.probes if not r["ok"]]


@pytest.mark.parametrize("lam", [0.5, 1.0, "stationary"])
def test_cross_validate_family_members(lam):
    assert C.cross_validate(C.shock_nonunique_family(lam), n_phi=9).verdict == PASS


def test_manifest_serializes():
    for name in C.names():
        m = C.entry(name).to_manifest(n_samples=5)
        assert m["kind"] == "catalog_entry" and m["name"] == name
        dumps(m)
    assert C.stat_equality().to_manifest()["trace_clipped"] is True


@pytest.mark.parametrize("name", ["square_box_blowup", "no_blowup_quadratic_g"])
def test_closed_forms_match_scipy(name):
    e = C.entry(name)
    for q0, p0 in e.seeds[:5]:
        rhs = lambda t, y: [float(e.model.fu(y[0], y[1])), -float(e.model.fx(y[0], y[1]))]
        ref = solve_ivp(rhs, (0, 0.5), [q0, p0], method="DOP853", rtol=1e-12, atol=1e-14)
        assert e.q(0.5, q0, p0) == pytest.approx(ref.y[0, -1], rel=1e-9, abs=1e-12)
        assert e.p(0.5, q0, p0) == pytest.approx(ref.y[1, -1], rel=1e-9, abs=1e-12)


def test_global_illposed_every_characteristic_escapes():
    e = C.global_illposed()
    for q0, p0 in e.seeds:
        tr = integrate_characteristic(e.model, q0, p0, 2.0)
        assert tr.termination.cause in (VALUE_BLOWUP, POSITION_BLOWUP)
        assert tr.t_end < 1.0
        # the state exceeds 1e3 before t = 0.999 and matches the closed form on the way
        q, p = tr.at(0.999) if tr.t_end >= 0.999 else (tr.q[-1], tr.p[-1])
        assert max(abs(q), abs(p)) > 1e3
        qc, pc = e.characteristic(0.5, q0)
        assert tr.at(0.5) == pytest.approx((float(qc), float(pc)), rel=1e-6)


def test_box_exact_profile():
    e = C.square_box_blowup()
    u = e.evaluator(np.array([0.0, 0.5, 2.0]), 0.0)
    np.testing.assert_array_equal(u, [-1.0, -1.0, 0.0])
    assert e.evaluator(np.array([0.0]), 0.5)[0] == pytest.approx(-2.0)
    # u is continuous across the edge of the shrinking box, |x| = (1-t)^2
    t = 0.5
    a = (1 - t) ** 2
    lo, hi = e.evaluator(np.array([a - 1e-9, a + 1e-9]), t)
    assert lo == pytest.approx(hi, rel=1e-6)


def test_bad_data_entry_has_no_characteristic():
    e = C.bad_data_no_weak(K=2.0, T=0.5)
    assert e.params == {"K": 2.0, "T": 0.5}
    assert e.characteristic is None
    assert math.isinf(e.field.trace(0.0, 0.1, "+"))

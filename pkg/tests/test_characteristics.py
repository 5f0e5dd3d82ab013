import csv
import json
import math
import time

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.integrate import solve_ivp

from hetflux.characteristics import (CharacteristicOptions, detect_crossings, estimate_blowup_time,
                                     fan_characteristics, integrate_batch, integrate_characteristic,
                                     write_manifest)
from hetflux.flux import FluxModel

FLIP = FluxModel.multiplicative("x", "u^2")


def _reference(model, q0, p0, ts):
    """Independent oracle: scipy LSODA/RK45 on q' = f_u, p' = -f_x."""
    sol = solve_ivp(lambda t, y: [model.fu(y[0], y[1]), -model.fx(y[0], y[1])], (0, ts[-1]), [q0, p0],
                    t_eval=ts, rtol=1e-12, atol=1e-14, method="DOP853")
    return sol.y


def test_value_blowup_time_and_runtime():
    t0 = time.perf_counter()
    tr = integrate_characteristic(FLIP, 1.0, -1.0, 2.0)
    elapsed = time.perf_counter() - t0
    assert tr.termination.cause == "value_blowup"
    assert 0.99 <= tr.termination.t_star <= 1.01
    assert tr.termination.t_star == pytest.approx(1.0, abs=1e-6)
    assert elapsed < 1.0


def test_flipping_matches_independent_integration():
    tr = integrate_characteristic(FLIP, 1.0, -1.0, 2.0)
    ts = np.linspace(0, 0.9, 19)
    q, p = tr.at(ts)
    ref = _reference(FLIP, 1.0, -1.0, ts)
    np.testing.assert_allclose(q, ref[0], rtol=1e-6)
    np.testing.assert_allclose(p, ref[1], rtol=1e-6)
    # and the closed form, written out here
    np.testing.assert_allclose(p, 1.0 / (ts - 1.0), rtol=1e-6)
    np.testing.assert_allclose(q, (1.0 - ts) ** 2, rtol=1e-6)


def test_flux_is_conserved():
    tr = integrate_characteristic(FLIP, 0.7, -2.0, 1.0)
    f0 = float(FLIP.f(0.7, -2.0))
    assert tr.conserved_flux == f0
    assert tr.max_flux_residual() <= 1e-8 * (1 + abs(f0))


def test_without_projection_flux_still_close():
    tr = integrate_characteristic(FLIP, 0.7, -1.0, 0.5, CharacteristicOptions(project=False))
    assert tr.max_flux_residual() < 1e-8


def test_entered_interface_without_blowup():
    # h(p0) = 0 keeps p = -1 fixed while q = exp(-t) decays into the zero of g
    # atol must resolve q below the 1e-14 margin
    m = FluxModel.multiplicative("x", "u^2 + u")
    tr = integrate_characteristic(m, 1.0, -1.0, 40.0, CharacteristicOptions(atol=1e-20))
    assert tr.termination.cause == "entered_interface"
    assert tr.termination.location == 0.0
    assert np.all(tr.p == -1.0)
    assert tr.t_end == pytest.approx(math.log(1e14), rel=1e-2)


def test_reached_horizon():
    tr = integrate_characteristic(FLIP, 1.0, 1.0, 3.0)
    assert tr.termination.cause == "reached_horizon"
    assert tr.t_end == 3.0
    assert tr.q[-1] == pytest.approx(16.0, rel=1e-8)


def test_position_blowup_for_coercive_flux():
    m = FluxModel.general("x*u^2 + u^4")
    tr = integrate_characteristic(m, 0.0, -1.0, 2.0)
    assert tr.termination.cause in ("value_blowup", "position_blowup")
    assert tr.termination.t_star == pytest.approx(1.0, abs=1e-3)


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        integrate_characteristic(FLIP, 1.0, 1.0, 0.0)


def test_blowup_estimate_flipping():
    assert estimate_blowup_time(FLIP, 2.0, -0.5) == pytest.approx(2.0, rel=1e-6)
    assert estimate_blowup_time(FLIP, 2.0, 0.5) is None


@pytest.mark.parametrize("seed", range(3))
def test_quadratic_g_no_blowup(seed):
    rng = np.random.default_rng(seed)
    q0, p0 = rng.uniform(-2, 2, 2)
    assert estimate_blowup_time(FluxModel.multiplicative("x^2", "u^2"), q0, p0, max_horizon=50) is None


def test_fan_labels_and_batch_threads(monkeypatch):
    monkeypatch.setenv("HETFLUX_THREADS", "3")
    fan = fan_characteristics(FLIP, 1.0, (-1.0, 0.0), 4, 0.5)
    assert [tr.label["fan_index"] for tr in fan] == [0, 1, 2, 3]
    assert fan[0].p0 == -1.0 and fan[-1].p0 == 0.0
    serial = integrate_batch(FLIP, [(1.0, p) for p in np.linspace(-1, 0, 4)], 0.5)
    monkeypatch.setenv("HETFLUX_THREADS", "1")
    for a, b in zip(fan, serial):
        np.testing.assert_array_equal(a.q, b.q)
    with pytest.raises(ValueError):
        fan_characteristics(FLIP, 1.0, (-1.0, 0.0), 1, 0.5)


def test_crossing_burgers():
    burgers = FluxModel.multiplicative("1", "0.5*u^2")
    trs = integrate_batch(burgers, [(0.0, 1.0), (1.0, 0.0)], 2.0)
    rep = detect_crossings(trs)
    c = rep.first()
    assert c.t == pytest.approx(1.0, abs=1e-10)
    assert c.x == pytest.approx(1.0, abs=1e-10)


def test_duplicate_seeds_degenerate():
    trs = integrate_batch(FLIP, [(1.0, 1.0), (1.0, 1.0)], 0.5)
    c = detect_crossings(trs).first()
    assert c.degenerate and c.t == 0.0


def test_no_crossing_reports_none():
    trs = integrate_batch(FLIP, [(1.0, 0.0), (2.0, 0.0)], 0.5)
    rep = detect_crossings(trs)
    assert rep.none and rep.to_dict() == {"crossings": "none"}


@settings(max_examples=20, deadline=None)
@given(q=st.lists(st.floats(0.05, 2.0), min_size=2, max_size=4, unique=True), m=st.floats(0.2, 2.0))
def test_monotone_separation(q, m):
    # g' = 1 > 0 and the same p0 = -m: q(t) = q0 (1 - m t)^2 keeps its order;
    # seeds closer than the integration tolerance are indistinguishable
    assume(np.min(np.diff(np.sort(q))) > 1e-6)
    trs = integrate_batch(FLIP, [(a, -m) for a in q], 0.95 / m)
    assert detect_crossings(trs).none
    order0 = np.argsort([tr.q0 for tr in trs])
    t_end = min(tr.t_end for tr in trs)
    order1 = np.argsort([tr.at(t_end)[0] for tr in trs])
    np.testing.assert_array_equal(order0, order1)


@settings(max_examples=25, deadline=None)
@given(seeds=st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=2, max_size=4))
def test_order_reversal_always_reported(seeds):
    burgers = FluxModel.multiplicative("1", "0.5*u^2")
    trs = integrate_batch(burgers, seeds, 1.0)
    rep = detect_crossings(trs)
    crossed = {(c.i, c.j) for c in rep.crossings}
    for i in range(len(trs)):
        for j in range(i + 1, len(trs)):
            d0 = trs[i].q0 - trs[j].q0
            d1 = trs[i].q[-1] - trs[j].q[-1]
            # seeds closer than the crossing tolerance count as coincident
            if d0 * d1 < 0 and abs(d0) > 1e-10:
                assert (i, j) in crossed


def test_csv_and_manifest(tmp_path):
    tr = integrate_characteristic(FLIP, 1.0, -1.0, 0.5)
    tr.to_csv(tmp_path / "c.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv", encoding="utf-8")))
    assert rows[0] == ["t", "q", "p", "flux_residual"]
    assert len(rows) == len(tr.t) + 1
    write_manifest([tr], tmp_path / "m.json", {"note": 1})
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["trajectories"][0]["termination"]["cause"] == "reached_horizon"
    assert data["note"] == 1

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetflux import serialize
from hetflux.fields import ClosedFormField, FieldError, constant, stationary_level
from hetflux.flux import FluxModel

FLIP = FluxModel.multiplicative("x", "u^2")


def _shock_field():
    return ClosedFormField(FLIP, [lambda t: 0.0, lambda t: t**2 / 4],
                           [lambda x, t: -1 / np.sqrt(-x), lambda x, t: 1 / np.sqrt(x), constant(0.0)])


def test_piece_lookup():
    fld = _shock_field()
    u = fld.evaluate(np.array([-4.0, 0.01, 1.0]), 1.0)
    np.testing.assert_allclose(u, [-0.5, 10.0, 0.0])
    assert fld.evaluate(-4.0, 0.0) == pytest.approx(-0.5)
    np.testing.assert_allclose(fld.discontinuities(2.0), [0.0, 1.0])


def test_traces_at_interface_and_shock():
    fld = _shock_field()
    assert fld.trace(0.0, 1.0, "-") == -math.inf
    assert fld.trace(0.0, 1.0, "+") == math.inf
    assert fld.trace(1.0, 2.0, "-") == pytest.approx(1.0)
    assert fld.trace(1.0, 2.0, "+") == 0.0
    with pytest.raises(ValueError):
        fld.trace(1.0, 2.0, "up")


def test_crossing_times():
    fld = _shock_field()
    (t,) = fld.crossing_times(0.25, 0.0, 2.0)
    assert t == pytest.approx(1.0, abs=1e-12)
    assert fld.crossing_times(5.0, 0.0, 2.0) == ()


def test_piece_count_validated():
    with pytest.raises(FieldError):
        ClosedFormField(FLIP, [lambda t: 0.0], [constant(0.0)])


def test_stationary_level_helper():
    fn = stationary_level(FLIP, 1.0)
    np.testing.assert_allclose(fn(np.array([-4.0, 4.0]), 0.0), [-0.5, 0.5])


def test_floats_at_seventeen_digits():
    text = serialize.dumps({"a": 0.1, "b": [1.0, math.inf, -math.inf], "c": None, "d": True})
    assert "0.10000000000000001" in text
    assert "Infinity" in text and "-Infinity" in text
    back = serialize.loads(text)
    assert back["a"] == 0.1 and back["b"][1] == math.inf


def test_numpy_and_to_dict_objects():
    class Thing:
        def to_dict(self):
            return {"x": np.float64(2.5), "n": np.int64(3), "arr": np.array([1.0, 2.0])}

    assert json.loads(serialize.dumps(Thing())) == {"x": 2.5, "n": 3, "arr": [1.0, 2.0]}
    with pytest.raises(TypeError):
        serialize.dumps(object())


@given(st.recursive(st.none() | st.booleans() | st.integers(-10**12, 10**12) | st.floats(allow_nan=False)
                    | st.text(max_size=5),
                    lambda c: st.lists(c, max_size=4) | st.dictionaries(st.text(max_size=4), c, max_size=4),
                    max_leaves=20))
def test_round_trip_lossless(obj):
    text = serialize.dumps(obj)
    assert serialize.loads(text) == obj
    assert serialize.dumps(serialize.loads(text)) == text

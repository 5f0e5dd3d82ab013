"""Solution fields ``u(x, t)`` shared by the front tracker, the catalog and the verifier."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence

import numpy as np

from .flux import FluxModel

#: trace magnitudes above this count as infinite
TRACE_THRESHOLD = 1e6


class FieldError(ValueError):
    pass


class Field(ABC):
    """A scalar field on ``R x [0, horizon]`` with known discontinuity curves.

    Subclasses provide :meth:`evaluate` and :meth:`discontinuities`. The
    attributes below feed the breakpoint-aware quadratures.
    """

    model: FluxModel
    horizon: float = math.inf
    stationary: bool = False

    def singular_points(self) -> tuple:
        """Points where the field may be unbounded (zeros of ``g``)."""
        if not self.model.is_multiplicative:
            return ()
        return tuple(self.model.zero_points((-1e3, 1e3)))

    def time_breaks(self) -> tuple:
        """Times at which the discontinuity structure changes."""
        return ()

    def crossing_times(self, x: float, t0: float, t1: float) -> tuple:
        """Times in ``(t0, t1)`` at which a discontinuity passes through ``x``."""
        return ()

    @abstractmethod
    def evaluate(self, x, t):
        """``u(x, t)``, vectorised over ``x`` for scalar ``t``."""

    @abstractmethod
    def discontinuities(self, t) -> np.ndarray:
        """Sorted positions of jumps (and kinks worth splitting at) at time ``t``."""

    def initial(self, x):
        return self.evaluate(x, 0.0)

    def check_time(self, t: float):
        if t < 0 or t > self.horizon:
            raise FieldError(f"t={t} outside [0, {self.horizon}]")

    def trace(self, x: float, t: float, side: str) -> float:
        """One-sided limit ``u(x-, t)`` or ``u(x+, t)``; ``±inf`` past the threshold."""
        self.check_time(t)
        if side not in ("-", "+", "left", "right"):
            raise ValueError(f"side must be '-' or '+', got {side!r}")
        sgn = -1.0 if side in ("-", "left") else 1.0
        if any(x == z for z in self.singular_points()):
            # approach the interface as closely as floating point allows
            eps = max(4e-16 * abs(x), 1e-300)
        else:
            eps = 1e-13 * max(1.0, abs(x))
        v = float(self.evaluate(np.array([x + sgn * eps]), t)[0])
        if not math.isfinite(v) or abs(v) > TRACE_THRESHOLD:
            return math.copysign(math.inf, v) if not math.isnan(v) else math.nan
        return v


class ClosedFormField(Field):
    """Piecewise closed-form field.

    ``boundaries`` are callables ``t -> position`` in left-to-right order and
    ``values`` has one callable ``(x, t) -> u`` per piece, so
    ``len(values) == len(boundaries) + 1``. Coinciding boundaries give
    empty pieces.
    """

    def __init__(self, model: FluxModel, boundaries: Sequence[Callable], values: Sequence[Callable],
                 name: str = "field", horizon: float = math.inf, stationary: bool = False,
                 time_breaks: Sequence[float] = (), curves: Optional[dict] = None,
                 singular: Optional[Sequence[float]] = None):
        if len(values) != len(boundaries) + 1:
            raise FieldError("need exactly one more piece than boundaries")
        self.model = model
        self.boundaries = tuple(boundaries)
        self.values = tuple(values)
        self.name = name
        self.horizon = horizon
        self.stationary = stationary
        self._time_breaks = tuple(time_breaks)
        self.curves = dict(curves or {})
        self._singular = None if singular is None else tuple(singular)

    def singular_points(self) -> tuple:
        if self._singular is not None:
            return self._singular
        return super().singular_points()

    def time_breaks(self) -> tuple:
        return self._time_breaks

    def positions(self, t: float) -> np.ndarray:
        return np.array([float(b(t)) for b in self.boundaries], dtype=float)

    def crossing_times(self, x: float, t0: float, t1: float) -> tuple:
        from scipy.optimize import brentq

        ts = np.linspace(t0, t1, 129)
        out = set()
        for b in self.boundaries:
            d = np.array([float(b(s)) for s in ts]) - x
            out.update(float(ts[k]) for k in np.flatnonzero(d[1:-1] == 0) + 1)
            for k in np.flatnonzero(d[:-1] * d[1:] < 0):
                out.add(brentq(lambda s: float(b(s)) - x, ts[k], ts[k + 1], xtol=1e-14))
        return tuple(sorted(out))

    def evaluate(self, x, t):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        pos = self.positions(t)
        idx = np.searchsorted(pos, xa, side="right")
        out = np.empty_like(xa)
        with np.errstate(all="ignore"):
            for i, fn in enumerate(self.values):
                m = idx == i
                if m.any():
                    out[m] = np.broadcast_to(fn(xa[m], t), (int(m.sum()),))
        return out[0] if scalar else out

    def discontinuities(self, t) -> np.ndarray:
        return np.unique(self.positions(t))


def constant(value: float) -> Callable:
    return lambda x, t: np.full(np.shape(x), float(value))


def stationary_level(model: FluxModel, level: float) -> Callable:
    """Piece value for a stationary branch of signed flux ``level``."""
    return lambda x, t: model.u_from_level(level, x)

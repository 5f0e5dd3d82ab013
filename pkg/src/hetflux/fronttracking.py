"""Front tracking with piecewise stationary states.

The initial datum is replaced by a profile whose signed flux
``F = sgn(u) f(x, u)`` takes values in ``delta * Z``. Between fronts the state
is the stationary branch of that level, so every front is an exact
Rankine-Hugoniot discontinuity whose path obeys ``y' = s(y)``. Fronts live in
an ordered list; only neighbours can collide, and predicted collisions and
interface arrivals sit in a heap keyed by time.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as E
from .fields import TRACE_THRESHOLD, Field, FieldError
from .flux import FluxModel, validate_assumptions
from .ode import DenseTrajectory, StiffnessError, dopri5
from .quadrature import integrate
from .riemann import (INTERFACE, ConsistencyError, Front, resolve_interaction,
                      solve_riemann)
from .flux import branch_for_level


class LivelockError(RuntimeError):
    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


class ForbiddenInterfaceError(ConsistencyError):
    """A level with the forbidden sign would touch an interface."""


# -- initial data ---------------------------------------------------------------

class Datum:
    """Initial datum: closed-form pieces ``(lo, hi, u(x))`` in increasing order."""

    def __init__(self, pieces: Sequence, name: str = "datum"):
        ps = []
        for lo, hi, fn in pieces:
            if isinstance(fn, (str, E.Expr, int, float)):
                ex = E.parse(fn) if isinstance(fn, str) else E.as_expr(fn)
                if not ex.free_vars() <= {"x"}:
                    raise ValueError(f"datum expression may only use x: {ex}")
                fn = ex.compile(("x",))
            ps.append((float(lo), float(hi), fn))
        for (a, b, _), (c, d, _) in zip(ps[:-1], ps[1:]):
            if b > c:
                raise ValueError("datum pieces must be ordered and non-overlapping")
        self.pieces = tuple(ps)
        self.name = name

    @classmethod
    def coerce(cls, u0) -> "Datum":
        if isinstance(u0, Datum):
            return u0
        if isinstance(u0, dict):
            return cls.from_spec(u0)
        if isinstance(u0, (str, E.Expr, int, float)):
            return cls([(-math.inf, math.inf, u0)])
        if callable(u0):
            return cls([(-math.inf, math.inf, u0)])
        raise TypeError(f"cannot interpret {u0!r} as a datum")

    @classmethod
    def from_spec(cls, spec: dict) -> "Datum":
        kind = spec.get("kind", "expression")
        if kind == "expression":
            return cls([(-math.inf, math.inf, spec["u"])])
        if kind == "piecewise":
            return cls([(p.get("lo", -math.inf), p.get("hi", math.inf), p["u"]) for p in spec["pieces"]])
        if kind == "samples":
            return cls.samples(spec["x"], spec["u"])
        raise ValueError(f"unknown datum kind {kind!r}")

    @classmethod
    def samples(cls, xs, us) -> "Datum":
        """Piecewise linear through samples, constant beyond them."""
        xs = np.asarray(xs, dtype=float)
        us = np.asarray(us, dtype=float)
        if xs.ndim != 1 or xs.shape != us.shape or np.any(np.diff(xs) <= 0):
            raise ValueError("samples need strictly increasing x and matching u")
        return cls([(-math.inf, math.inf, lambda x: np.interp(x, xs, us))], name="samples")

    @property
    def breakpoints(self) -> list:
        pts = set()
        for lo, hi, _ in self.pieces:
            pts.update(v for v in (lo, hi) if math.isfinite(v))
        return sorted(pts)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.shape(x))
        for lo, hi, fn in self.pieces:
            m = (x > lo) & (x < hi) if math.isfinite(lo) else (x < hi)
            if m.any():
                out[m] = np.broadcast_to(fn(x[m]), (int(np.count_nonzero(m)),))
        return out


# -- discretised profile -----------------------------------------------------------

class PiecewiseStationaryField(Field):
    """Piecewise stationary profile: level ``levels[i]`` between ``breakpoints[i-1]`` and ``breakpoints[i]``."""

    stationary = True

    def __init__(self, model: FluxModel, breakpoints, indices, delta: float, interfaces=(),
                 margins: Optional[dict] = None):
        self.model = model
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.delta = float(delta)
        self.levels = self.indices * self.delta
        self.interfaces = tuple(float(z) for z in interfaces)
        self.margins = dict(margins or {})
        if len(self.levels) != len(self.breakpoints) + 1:
            raise FieldError("need one more level than breakpoints")

    def singular_points(self) -> tuple:
        return self.interfaces

    def level_at(self, x):
        idx = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right")
        return self.levels[idx]

    def evaluate(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        lv = np.atleast_1d(self.level_at(x))
        xa = np.atleast_1d(x)
        out = np.zeros_like(xa)
        for L in np.unique(lv):
            m = lv == L
            out[m] = self.model.u_from_level(float(L), xa[m])
        return out[0] if x.ndim == 0 else out

    def discontinuities(self, t=0.0) -> np.ndarray:
        return self.breakpoints.copy()

    def signed_flux(self, x):
        return self.level_at(x)

    def __len__(self):
        return len(self.levels)


def _margin_width(model: FluxModel, delta: float, window) -> tuple:
    rep = validate_assumptions(model, window)
    expo = rep.growth_exponent
    if expo is None:
        # without a certified growth exponent fall back to the quadratic case
        expo = 2.0
    return delta ** (1.0 / expo), expo


def discretize(model: FluxModel, u0, delta: float, window: Sequence[float] = (-10.0, 10.0),
               samples: int = 4001, margin_width: Optional[float] = None) -> PiecewiseStationaryField:
    """Round ``sgn(u0) f(x, u0)`` to ``delta * Z`` and split at the level changes.

    The outermost levels in ``window`` extend to ``±inf``. Next to a zero of
    ``g``, a level whose sign the interface condition forbids on that side
    is replaced by zero over a margin of width ``delta^(1/(eta+eps))``.

    Raises:
        NotMultiplicativeError: for a general flux.
        ValueError: if ``g`` vanishes on an interval.
    """
    model.require_multiplicative("front tracking")
    if not delta > 0:
        raise ValueError("delta must be positive")
    datum = Datum.coerce(u0)
    lo, hi = float(window[0]), float(window[1])
    # an outer level cannot extend across a zero of g, so the window must contain them all
    far = model.zero_points((min(lo, -1e3), max(hi, 1e3)))
    if far.size:
        lo, hi = min(lo, float(far[0]) - 1.0), max(hi, float(far[-1]) + 1.0)
    feats = model.zero_set((lo, hi))
    if any(z.interval is not None for z in feats):
        raise ValueError("front tracking does not support g vanishing on an interval")
    zeros = [z.location for z in feats if lo < z.location < hi]

    def index(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            F = model.signed_flux(x, datum(x))
        if not np.all(np.isfinite(F)):
            raise ValueError("signed flux of the datum is not finite on the window")
        return np.floor(F / delta + 0.5).astype(np.int64)

    splits = sorted({lo, hi, *[p for p in datum.breakpoints if lo < p < hi], *zeros})
    bps, idx = [], []
    for a, b in zip(splits[:-1], splits[1:]):
        if a != splits[0]:
            bps.append(a)
        span = b - a
        pad = 1e-12 * max(1.0, abs(a), abs(b))
        n = max(16, int(samples * span / (hi - lo)))
        xs = np.linspace(a + pad, b - pad, n)
        ns = index(xs)
        seg_b, seg_i = [], [int(ns[0])]
        for k in range(len(xs) - 1):
            if ns[k] == ns[k + 1]:
                continue
            xl, xr, cur = xs[k], xs[k + 1], int(ns[k])
            while True:
                l_, r_ = xl, xr
                while r_ - l_ > 1e-14 * max(1.0, abs(l_)):
                    mid = 0.5 * (l_ + r_)
                    if mid in (l_, r_):
                        break
                    if int(index(np.array([mid]))[0]) == cur:
                        l_ = mid
                    else:
                        r_ = mid
                new = int(index(np.array([r_]))[0])
                seg_b.append(0.5 * (l_ + r_))
                seg_i.append(new)
                if new == int(ns[k + 1]):
                    break
                xl, cur = r_, new
        bps.extend(seg_b)
        idx.extend(seg_i)
    # margins at interfaces
    if margin_width is None and zeros:
        w, _ = _margin_width(model, delta, (lo, hi))
    else:
        w = margin_width or 0.0
    margins = {}
    for z in zeros:
        applied = [0.0, 0.0]
        k = bps.index(z)
        # left side: the interval to the left ends at z; negative levels are forbidden there
        if idx[k] < 0:
            bps, idx = _zero_range(bps, idx, z - w, z)
            applied[0] = w
        k = bps.index(z)
        if idx[k + 1] > 0:
            bps, idx = _zero_range(bps, idx, z, z + w)
            applied[1] = w
        margins[z] = tuple(applied)
    bps, idx = _merge(bps, idx, set(zeros))
    return PiecewiseStationaryField(model, bps, idx, delta, zeros, margins)


def _zero_range(bps, idx, a, b):
    """Set the level to 0 on ``(a, b)``, inserting breakpoints as needed."""
    bps = list(bps)
    idx = list(idx)
    for p in (a, b):
        if p not in bps:
            k = int(np.searchsorted(bps, p))
            bps.insert(k, p)
            idx.insert(k + 1, idx[k])
    ka, kb = bps.index(a), bps.index(b)
    for j in range(ka + 1, kb + 1):
        idx[j] = 0
    return bps, idx


def _merge(bps, idx, keep):
    out_b, out_i = [], [idx[0]]
    for p, n in zip(bps, idx[1:]):
        if n == out_i[-1] and p not in keep:
            continue
        out_b.append(p)
        out_i.append(n)
    return out_b, out_i


# -- evolution -----------------------------------------------------------------------

@dataclass(frozen=True)
class FTOptions:
    rtol: float = 1e-11
    atol: float = 1e-13
    clamp_eps: float = 1e-10
    collision_tol: float = 1e-10
    time_tol: float = 1e-12
    max_events: int = 500_000
    livelock_repeats: int = 2000

    @classmethod
    def coerce(cls, opts) -> "FTOptions":
        if opts is None:
            return cls()
        if isinstance(opts, cls):
            return opts
        return cls(**dict(opts))


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    position: float
    fronts_in: tuple
    fronts_out: tuple

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "position": self.position,
                "fronts_in": list(self.fronts_in), "fronts_out": list(self.fronts_out)}


class _Tracker:
    def __init__(self, field: PiecewiseStationaryField, model: FluxModel, T: float, o: FTOptions):
        self.model = model
        self.T = float(T)
        self.o = o
        self.field = field
        self.zeros = np.array(field.interfaces, dtype=float)
        self.order: list = []
        self.all: list = []
        self.heap: list = []
        self.seq = itertools.count()
        self.events: list = []
        self.snapshots: list = []
        self.count_history: list = []
        self.min_gap = math.inf

    def _register(self, front: Front) -> None:
        # ids are per run so that identical inputs give identical exports
        front.id = len(self.all)
        self.all.append(front)

    def domain(self, x):
        z = self.zeros
        left = z[z < x]
        right = z[z > x]
        return (float(left[-1]) if left.size else -math.inf, float(right[0]) if right.size else math.inf)

    # front motion
    def launch(self, front: Front):
        t0, y0 = front.birth_time, front.position
        a, b = front.domain
        eps = self.o.clamp_eps
        rhs = lambda t, y: np.atleast_1d(front.speed(y))
        near = lambda y: min(y - a, b - y) <= eps
        if near(y0):
            self._clamp_from(front, np.array([t0]), np.array([y0]), np.atleast_1d(front.speed(y0)))
            return
        if t0 >= self.T:
            front.trajectory = DenseTrajectory(np.array([t0]), np.array([y0]), np.array([0.0]))
            return
        valid = lambda t, y: a < y[0] < b
        stop = lambda t, y: "interface" if near(y[0]) else None
        try:
            res = dopri5(rhs, t0, [y0], self.T, rtol=self.o.rtol, atol=self.o.atol,
                         valid=valid, stop=stop)
        except StiffnessError as exc:
            raise StiffnessError(f"front {front.id}: {exc}", exc.t, exc.y) from None
        if res.stopped:
            self._clamp_from(front, res.t, res.y[:, 0], res.dy[:, 0])
        else:
            front.trajectory = DenseTrajectory(res.t, res.y[:, 0], res.dy[:, 0])

    def _clamp_from(self, front, ts, ys, dys):
        a, b = front.domain
        ys_last = ys[-1]
        zbar = a if ys_last - a < b - ys_last else b
        d = abs(zbar - ys_last)
        v = abs(dys[-1])
        # square-root approach to the interface: distance ~ (t_c - t)^2
        tc = ts[-1] + (2.0 * d / v if v > 0 else 0.0)
        if tc > ts[-1]:
            ts = np.append(ts, tc)
            ys = np.append(ys, zbar)
            dys = np.append(dys, 0.0)
        else:
            ys = ys.copy()
            ys[-1] = zbar
        front.trajectory = DenseTrajectory(ts, ys, dys)
        if tc <= self.T:
            self.push(tc, "clamp", (front, zbar))

    def push(self, t, kind, payload):
        heapq.heappush(self.heap, (t, next(self.seq), kind, payload))

    # collisions
    def predict(self, A: Front, B: Front, t_now: float):
        if A.is_static or B.is_static:
            return
        t_lo = max(A.birth_time, B.birth_time, t_now)
        t_hi = min(A.end_time(), B.end_time(), self.T)
        if t_hi <= t_lo:
            return
        ta, tb = A.trajectory.t, B.trajectory.t
        grid = np.union1d(ta[(ta > t_lo) & (ta < t_hi)], tb[(tb > t_lo) & (tb < t_hi)])
        grid = np.concatenate([[t_lo], grid, [t_hi]])
        d = B.y(grid) - A.y(grid)
        tol = self.o.collision_tol
        pos = np.flatnonzero(d > tol)
        if d[0] < -tol:
            self.push(t_lo, "collision", (A, B))
            return
        if pos.size == 0:
            if np.all(np.abs(d) <= tol) and t_lo > max(A.birth_time, B.birth_time):
                self.push(t_lo, "collision", (A, B))
            return
        k0 = pos[0]
        hit = np.flatnonzero(d[k0:] <= 0)
        if hit.size == 0:
            return
        k = k0 + hit[0]
        gap = lambda s: float(B.y(s) - A.y(s))
        if d[k] == 0:
            tc = grid[k]
        else:
            tc = brentq(gap, grid[k - 1], grid[k], xtol=1e-15, rtol=1e-15)
        self.push(float(tc), "collision", (A, B))

    def neighbours(self, f: Front):
        i = self.order.index(f)
        left = self.order[i - 1] if i > 0 else None
        right = self.order[i + 1] if i + 1 < len(self.order) else None
        return left, right

    def record(self, t):
        self.snapshots.append((t, tuple(self.order)))
        self.count_history.append((t, sum(1 for f in self.order if not f.is_static)))
        moving = [float(f.y(t)) for f in self.order]
        if len(moving) > 1:
            self.min_gap = min(self.min_gap, float(np.min(np.diff(moving))))

    def run(self):
        fld = self.field
        model = self.model
        for i, x in enumerate(fld.breakpoints):
            Fl, Fr = float(fld.levels[i]), float(fld.levels[i + 1])
            if x in fld.interfaces:
                _check_interface_levels(x, Fl, Fr)
                f = Front(INTERFACE, Fl, Fr, float(x), 0.0, model, (float(x), float(x)))
                self.order.append(f)
                self._register(f)
                continue
            dom = self.domain(x)
            fan = solve_riemann(model, float(x), 0.0, branch_for_level(model, Fl, dom),
                                branch_for_level(model, Fr, dom), fld.delta, domain=dom)
            for f in fan.fronts:
                self.order.append(f)
                self._register(f)
        for f in self.order:
            if not f.is_static:
                self.launch(f)
        for A, B in zip(self.order[:-1], self.order[1:]):
            self.predict(A, B, 0.0)
        self.record(0.0)
        last_t, repeats, n_events = -math.inf, 0, 0
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            if t > self.T:
                break
            if kind == "collision":
                A, B = payload
                if A.death_time is not None or B.death_time is not None:
                    continue
                if self.order.index(B) != self.order.index(A) + 1:
                    continue
                self._collide(t, A, B)
            else:
                front, zbar = payload
                if front.death_time is not None:
                    continue
                self._clamp(t, front, zbar)
            n_events += 1
            if t - last_t <= self.o.time_tol:
                repeats += 1
                if repeats > self.o.livelock_repeats:
                    raise LivelockError(f"{repeats} events within {self.o.time_tol} of t={t}",
                                        self.state_dump(t))
            else:
                repeats = 0
            last_t = t
            if n_events > self.o.max_events:
                raise LivelockError(f"event budget {self.o.max_events} exhausted at t={t}", self.state_dump(t))
            self.record(t)

    def _collide(self, t, A, B):
        x = float(A.y(t))
        tol = self.o.collision_tol
        i = self.order.index(A)
        j = i + 1
        while i > 0 and not self.order[i - 1].is_static and abs(float(self.order[i - 1].y(t)) - x) <= tol:
            i -= 1
        while j + 1 < len(self.order) and not self.order[j + 1].is_static and \
                abs(float(self.order[j + 1].y(t)) - x) <= tol:
            j += 1
        group = self.order[i:j + 1]
        for f in group:
            f.death_time = t
        new = resolve_interaction(self.model, x, t, group, domain=A.domain)
        out = ()
        if new is not None:
            self.order[i:j + 1] = [new]
            self._register(new)
            self.launch(new)
            out = (new.id,)
            left, right = self.neighbours(new)
            if left is not None:
                self.predict(left, new, t)
            if right is not None:
                self.predict(new, right, t)
        else:
            del self.order[i:j + 1]
            if 0 < i < len(self.order):
                self.predict(self.order[i - 1], self.order[i], t)
        self.events.append(Event(t, "merge" if new is not None else "retire", x,
                                 tuple(f.id for f in group), out))

    def _clamp(self, t, front, zbar):
        k = self.order.index(front)
        left_side = k + 1 < len(self.order) and self.order[k + 1].is_static and self.order[k + 1].position == zbar
        right_side = k > 0 and self.order[k - 1].is_static and self.order[k - 1].position == zbar
        if not (left_side or right_side):
            return
        iface = self.order[k + 1] if left_side else self.order[k - 1]
        front.death_time = t
        iface.death_time = t
        if left_side:
            Fl, Fr = front.F_l, iface.F_r
        else:
            Fl, Fr = iface.F_l, front.F_r
        _check_interface_levels(zbar, Fl, Fr)
        new = Front(INTERFACE, Fl, Fr, zbar, t, self.model, (zbar, zbar), parents=(front.id, iface.id))
        self._register(new)
        if left_side:
            self.order[k:k + 2] = [new]
        else:
            self.order[k - 1:k + 1] = [new]
        self.events.append(Event(t, "clamp", zbar, (front.id, iface.id), (new.id,)))

    def state_dump(self, t):
        return {"time": t, "fronts": [{"id": f.id, "kind": f.kind, "F_l": f.F_l, "F_r": f.F_r,
                                        "y": float(f.y(t))} for f in self.order]}


def _check_interface_levels(z, Fl, Fr):
    if Fl < 0:
        raise ForbiddenInterfaceError(f"level {Fl} < 0 left of the interface at x={z}")
    if Fr > 0:
        raise ForbiddenInterfaceError(f"level {Fr} > 0 right of the interface at x={z}")


def evolve(field: PiecewiseStationaryField, model: FluxModel, T: float, opts=None) -> "FrontTrackingSolution":
    """Run the front tracker up to time ``T``."""
    if not T > 0:
        raise ValueError("horizon must be positive")
    tr = _Tracker(field, model, T, FTOptions.coerce(opts))
    tr.run()
    return FrontTrackingSolution(tr)


def solve(model: FluxModel, u0, delta: float, T: float, window=(-10.0, 10.0), opts=None):
    """``discretize`` followed by ``evolve``."""
    return evolve(discretize(model, u0, delta, window), model, T, opts)


class FrontTrackingSolution(Field):
    """Result of :func:`evolve`; evaluable on ``R x [0, T]``."""

    def __init__(self, tracker: _Tracker):
        self.model = tracker.model
        self.horizon = tracker.T
        self.delta = tracker.field.delta
        self.initial_field = tracker.field
        self.fronts = tuple(tracker.all)
        self.events = tuple(tracker.events)
        self._snap_t = np.array([s[0] for s in tracker.snapshots])
        self._snap = [s[1] for s in tracker.snapshots]
        self.front_count_history = tuple(tracker.count_history)
        self.min_piece_width = tracker.min_gap
        self.interfaces = tracker.field.interfaces
        self._left_level = float(tracker.field.levels[0])
        self.stationary = not any(not f.is_static for f in self.fronts)

    def singular_points(self) -> tuple:
        return self.interfaces

    def time_breaks(self) -> tuple:
        return tuple(sorted({e.time for e in self.events if 0 < e.time < self.horizon}))

    def crossing_times(self, x: float, t0: float, t1: float) -> tuple:
        out = set()
        for f in self.moving_fronts():
            a = max(t0, f.birth_time)
            b = min(t1, f.death_time if f.death_time is not None else self.horizon)
            if not b > a:
                continue
            ts = np.linspace(a, b, 65)
            d = np.asarray(f.y(ts), dtype=float) - x
            out.update(float(ts[k]) for k in np.flatnonzero(d[1:-1] == 0) + 1)
            for k in np.flatnonzero(d[:-1] * d[1:] < 0):
                out.add(brentq(lambda s: float(f.y(s)) - x, ts[k], ts[k + 1], xtol=1e-14))
        return tuple(sorted(out))

    def moving_fronts(self, t: Optional[float] = None) -> list:
        if t is None:
            return [f for f in self.fronts if not f.is_static]
        return [f for f in self.alive(t) if not f.is_static]

    def alive(self, t: float) -> tuple:
        self.check_time(t)
        k = int(np.searchsorted(self._snap_t, t, side="right")) - 1
        return self._snap[max(k, 0)]

    def _state(self, t):
        order = self.alive(t)
        pos = np.array([float(f.y(t)) for f in order])
        if pos.size:
            pos = np.maximum.accumulate(pos)
        levels = np.array([self._left_level] + [f.F_r for f in order])
        return order, pos, levels

    def level_at(self, x, t):
        _, pos, levels = self._state(t)
        return levels[np.searchsorted(pos, np.asarray(x, dtype=float), side="right")]

    def evaluate(self, x, t):
        x = np.asarray(x, dtype=float)
        xa = np.atleast_1d(x)
        lv = np.atleast_1d(self.level_at(xa, t))
        out = np.zeros_like(xa)
        for L in np.unique(lv):
            m = lv == L
            out[m] = self.model.u_from_level(float(L), xa[m])
        return out[0] if x.ndim == 0 else out

    def discontinuities(self, t) -> np.ndarray:
        order, pos, _ = self._state(t)
        keep = [p for f, p in zip(order, pos) if f.F_l != f.F_r or f.is_static]
        return np.unique(np.array(keep, dtype=float))

    def trace(self, x: float, t: float, side: str) -> float:
        if side not in ("-", "+", "left", "right"):
            raise ValueError(f"side must be '-' or '+', got {side!r}")
        left = side in ("-", "left")
        order, pos, levels = self._state(t)
        tol = 1e-10 * max(1.0, abs(x))
        hit = np.flatnonzero(np.abs(pos - x) <= tol)
        if hit.size:
            f = order[hit[0]] if left else order[hit[-1]]
            level = f.F_l if left else f.F_r
        else:
            level = float(levels[np.searchsorted(pos, x, side="right")])
        gx = float(self.model.g(x))
        if gx == 0.0:
            if level == 0:
                return 0.0
            side_g = float(self.model.g(x - 1e-9 if left else x + 1e-9))
            return math.copysign(math.inf, np.sign(level) * np.sign(side_g))
        v = float(self.model.u_from_level(level, np.array([x]))[0])
        if abs(v) > TRACE_THRESHOLD:
            return math.copysign(math.inf, v)
        return v

    def front_curve(self, front: Front, n: int = 200):
        """Samples ``(t, y)`` of a front over its life inside ``[0, T]``."""
        t1 = min(front.death_time if front.death_time is not None else self.horizon, self.horizon)
        t = np.linspace(front.birth_time, t1, n)
        return t, np.asarray(front.y(t), dtype=float)

    def l1_distance(self, other: Field, interval, t: float) -> float:
        return l1_distance(self, other, interval, t)

    def to_manifest(self, n_samples: int = 0) -> dict:
        traces = []
        clipped = False
        for z in self.interfaces:
            for t in (0.0, self.horizon):
                l, r = self.trace(z, t, "-"), self.trace(z, t, "+")
                clipped = clipped or math.isinf(l) or math.isinf(r)
                traces.append({"x": z, "t": t, "left": l, "right": r})
        fronts = []
        for f in self.fronts:
            d = f.to_dict()
            if f.trajectory is not None:
                ts, ys = self.front_curve(f, 20)
                d["trajectory"] = {"t": ts.tolist(), "y": ys.tolist()}
            fronts.append(d)
        return {
            "kind": "front_tracking_solution",
            "delta": self.delta,
            "horizon": self.horizon,
            "events": [e.to_dict() for e in self.events],
            "fronts": fronts,
            "front_count": [list(c) for c in self.front_count_history],
            "min_piece_width": self.min_piece_width if math.isfinite(self.min_piece_width) else None,
            "interface_traces": traces,
            "trace_clipped": clipped,
        }

    def write_trajectories_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["front_id", "t", "y"])
            for f in self.fronts:
                if f.trajectory is None:
                    continue
                ts, ys = self.front_curve(f, 50)
                for a, b in zip(ts, ys):
                    w.writerow([f.id, f"{a:.17g}", f"{b:.17g}"])


def write_field_csv(field: Field, path, xs, ts) -> None:
    """Long-format dump ``t,x,u`` of ``field`` on a grid."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for t in ts:
            u = field.evaluate(np.asarray(xs, dtype=float), float(t))
            for a, b in zip(xs, u):
                w.writerow([f"{float(t):.17g}", f"{float(a):.17g}", f"{float(b):.17g}"])


def l1_distance(a: Field, b: Field, interval, t: float, n_panels: int = 64) -> float:
    """``∫ |u_a - u_b| dx`` over ``interval`` at time ``t``.

    Every discontinuity of either field is a quadrature breakpoint and cells
    ending at a zero of ``g`` are graded toward it.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError("l1_distance needs a bounded interval")
    breaks = np.concatenate([a.discontinuities(t), b.discontinuities(t)])
    sing = set(a.singular_points()) | set(b.singular_points())
    fun = lambda x: np.abs(a.evaluate(x, t) - b.evaluate(x, t))
    return integrate(fun, lo, hi, breaks=breaks, singular=sing, max_panel=(hi - lo) / n_panels)

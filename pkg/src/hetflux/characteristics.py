"""Characteristic curves ``q' = f_u(q, p)``, ``p' = -f_x(q, p)`` with blow-up detection.

The flux value ``f(q, p)`` is invariant along a characteristic. After every
accepted step the value ``p`` is pulled back onto that level set, which keeps
the integration honest close to a blow-up.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .flux import FluxModel
from .ode import DenseTrajectory, StiffnessError, dopri5

REACHED_HORIZON = "reached_horizon"
VALUE_BLOWUP = "value_blowup"
POSITION_BLOWUP = "position_blowup"
ENTERED_INTERFACE = "entered_interface"


@dataclass(frozen=True)
class CharacteristicOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    threshold: float = 1e6
    # distance to a zero of g at which a bounded trajectory is declared stuck
    interface_margin: float = 1e-14
    fit_samples: int = 20
    project: bool = True
    max_step: float = math.inf
    zero_window: tuple = (-1e3, 1e3)

    @classmethod
    def coerce(cls, opts) -> "CharacteristicOptions":
        if opts is None:
            return cls()
        if isinstance(opts, cls):
            return opts
        return cls(**dict(opts))


@dataclass(frozen=True)
class Termination:
    cause: str
    t_star: Optional[float] = None
    location: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CharacteristicTrajectory:
    """Sampled ``(t, q, p)`` path with its conserved flux value."""

    model: FluxModel
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    conserved_flux: float
    termination: Termination
    steps: int = 0
    rejected: int = 0
    label: dict = field(default_factory=dict)

    @property
    def q0(self) -> float:
        return float(self.q[0])

    @property
    def p0(self) -> float:
        return float(self.p[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def flux_residual(self) -> np.ndarray:
        return np.abs(self.model.f(self.q, self.p) - self.conserved_flux)

    def max_flux_residual(self) -> float:
        return float(np.max(self.flux_residual()))

    def dense(self) -> DenseTrajectory:
        y = np.column_stack([self.q, self.p])
        dy = np.column_stack([self.model.fu(self.q, self.p), -self.model.fx(self.q, self.p)])
        return DenseTrajectory(self.t, y, dy)

    def at(self, t):
        """Interpolated ``(q, p)`` at time(s) ``t`` inside the sampled range."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t[0] - 1e-15) or np.any(t_arr > self.t[-1] + 1e-15):
            raise ValueError("time outside the integrated range")
        yy = self.dense()(t_arr)
        if np.ndim(t_arr) == 0:
            return float(yy[0]), float(yy[1])
        return yy[:, 0], yy[:, 1]

    def summary(self) -> dict:
        return {
            "q0": self.q0,
            "p0": self.p0,
            "conserved_flux": self.conserved_flux,
            "termination": self.termination.to_dict(),
            "t_end": self.t_end,
            "steps": self.steps,
            "rejected_steps": self.rejected,
            "max_flux_residual": self.max_flux_residual(),
            **({"label": self.label} if self.label else {}),
        }

    def to_csv(self, path) -> None:
        res = self.flux_residual()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q", "p", "flux_residual"])
            for row in zip(self.t, self.q, self.p, res):
                w.writerow([f"{v:.17g}" for v in row])


def _project_factory(model: FluxModel, f0: float):
    # Newton on p only; large corrections (a jump to another branch of the level
    # set, e.g. p = 0 when f0 = 0) are refused and the step is kept as is
    def project(t, y):
        q, p = float(y[0]), float(y[1])
        pt = p
        r0 = float(model.f(q, p)) - f0
        r = r0
        for _ in range(8):
            d = float(model.fu(q, pt))
            if not math.isfinite(d) or abs(d) < 1e-300:
                return y
            step = r / d
            pt -= step
            r = float(model.f(q, pt)) - f0
            if abs(step) <= 1e-16 * max(1.0, abs(pt)):
                break
        if not (math.isfinite(pt) and abs(r) <= abs(r0)) or abs(pt - p) > 1e-6 * (1.0 + abs(p)):
            return y
        return np.array([q, pt])

    return project


def _reciprocal_fit(t: np.ndarray, v: np.ndarray) -> Optional[float]:
    """Root of a least-squares line through ``1/v`` against ``t``."""
    with np.errstate(all="ignore"):
        w = 1.0 / v
    ok = np.isfinite(w)
    if ok.sum() < 2:
        return None
    a, b = np.polyfit(t[ok], w[ok], 1)
    if a == 0:
        return None
    return _after(float(-b / a), t)


def _after(root: float, t: np.ndarray) -> Optional[float]:
    # a blow-up time cannot precede the samples it was fitted to
    return root if root >= t[-1] - 1e-9 * max(1.0, abs(t[-1])) else None


def _log_rate_fit(t: np.ndarray, v: np.ndarray, dv: np.ndarray) -> Optional[float]:
    """Root of a line through ``v/v'``; exact for power-law blow-up."""
    with np.errstate(all="ignore"):
        w = v / dv
    ok = np.isfinite(w)
    if ok.sum() < 2:
        return None
    a, b = np.polyfit(t[ok], w[ok], 1)
    # v/v' shrinks linearly to zero for a power law; a flat or growing ratio is not blow-up
    if not a < 0:
        return None
    return _after(float(-b / a), t)


def integrate_characteristic(model: FluxModel, q0: float, p0: float, horizon: float,
                             opts=None) -> CharacteristicTrajectory:
    """Integrate one characteristic from ``(q0, p0)`` up to ``horizon``.

    Raises:
        ValueError: if ``horizon <= 0``.
        StiffnessError: on step size underflow before any termination test fires.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    o = CharacteristicOptions.coerce(opts)
    f0 = float(model.f(q0, p0))
    zeros = np.array([])
    if model.is_multiplicative and o.interface_margin > 0:
        zeros = model.zero_points(o.zero_window)

    def dist(q):
        return float(np.min(np.abs(zeros - q))) if zeros.size else math.inf

    watch_interface = dist(q0) > o.interface_margin

    def rhs(t, y):
        return np.array([model.fu(y[0], y[1]), -model.fx(y[0], y[1])], dtype=float)

    def stop(t, y):
        if abs(y[1]) >= o.threshold:
            return VALUE_BLOWUP
        if abs(y[0]) >= o.threshold:
            return POSITION_BLOWUP
        if watch_interface and dist(y[0]) <= o.interface_margin:
            return ENTERED_INTERFACE
        return None

    proj = _project_factory(model, f0) if o.project else None
    res = dopri5(rhs, 0.0, [q0, p0], float(horizon), rtol=o.rtol, atol=o.atol,
                 max_step=o.max_step, project=proj, stop=stop)
    t, q, p = res.t, res.y[:, 0], res.y[:, 1]
    cause = res.stopped or REACHED_HORIZON
    t_star = None
    loc = None
    n = min(o.fit_samples, len(t))
    if cause == VALUE_BLOWUP:
        t_star = _reciprocal_fit(t[-n:], p[-n:])
        loc = float(q[-1])
    elif cause == POSITION_BLOWUP:
        t_star = _log_rate_fit(t[-n:], q[-n:], res.dy[-n:, 0])
    elif cause == ENTERED_INTERFACE:
        loc = float(zeros[np.argmin(np.abs(zeros - q[-1]))])
    return CharacteristicTrajectory(model, t, q, p, f0, Termination(cause, t_star, loc),
                                    res.n_steps, res.n_rejected)


def _threads() -> int:
    import os

    try:
        return max(1, int(os.environ.get("HETFLUX_THREADS", "1")))
    except ValueError:
        return 1


def integrate_batch(model: FluxModel, seeds: Sequence, horizon: float, opts=None) -> list:
    """Integrate many ``(q0, p0)`` seeds; runs in a thread pool if ``HETFLUX_THREADS > 1``."""
    job = lambda s: integrate_characteristic(model, float(s[0]), float(s[1]), horizon, opts)
    n = _threads()
    if n > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            return list(ex.map(job, seeds))
    return [job(s) for s in seeds]


def fan_characteristics(model: FluxModel, x0: float, p_range: Sequence[float], n: int,
                        horizon: float, opts=None) -> list:
    """Characteristics from one point with values on a monotone grid over ``p_range``."""
    if n < 2:
        raise ValueError("a fan needs at least two characteristics")
    ps = np.linspace(float(p_range[0]), float(p_range[1]), int(n))
    out = integrate_batch(model, [(x0, p) for p in ps], horizon, opts)
    for i, tr in enumerate(out):
        tr.label = {"fan_index": i, "x0": float(x0), "p0": float(ps[i])}
    return out


@dataclass(frozen=True)
class Crossing:
    i: int
    j: int
    t: float
    x: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CrossingReport:
    crossings: tuple = ()

    @property
    def none(self) -> bool:
        return not self.crossings

    def first(self) -> Optional[Crossing]:
        return min(self.crossings, key=lambda c: c.t) if self.crossings else None

    def to_dict(self) -> dict:
        return {"crossings": [c.to_dict() for c in self.crossings] or "none"}


def detect_crossings(trajectories: Sequence[CharacteristicTrajectory], tol: float = 1e-10) -> CrossingReport:
    """First sign change of every pairwise position difference.

    Pairs that start at the same point separate first and are only reported if
    they later swap order. Identical seeds are reported as degenerate at t=0.
    """
    dense = [tr.dense() for tr in trajectories]
    found = []
    for i in range(len(trajectories)):
        for j in range(i + 1, len(trajectories)):
            a, b = trajectories[i], trajectories[j]
            if a.q0 == b.q0 and a.p0 == b.p0:
                found.append(Crossing(i, j, 0.0, a.q0, degenerate=True))
                continue
            t_hi = min(a.t_end, b.t_end)
            grid = np.union1d(a.t[a.t <= t_hi], b.t[b.t <= t_hi])
            if grid.size < 2:
                continue
            da, db = dense[i], dense[j]
            gap = lambda s: float(da(s)[0] - db(s)[0])
            d = da(grid)[:, 0] - db(grid)[:, 0]
            nz = np.flatnonzero(np.abs(d) > tol)
            if nz.size == 0:
                continue
            s0 = np.sign(d[nz[0]])
            hit = None
            for k in range(nz[0] + 1, len(grid)):
                if np.sign(d[k]) != s0 and abs(d[k]) > 0:
                    hit = k
                    break
                if d[k] == 0:
                    hit = k
                    break
            if hit is None:
                continue
            lo, hi = grid[hit - 1], grid[hit]
            if gap(hi) == 0:
                tc = hi
            else:
                tc = brentq(gap, lo, hi, xtol=1e-14)
            found.append(Crossing(i, j, float(tc), float(da(tc)[0])))
    found.sort(key=lambda c: (c.t, c.i, c.j))
    return CrossingReport(tuple(found))


#: magnitudes at which growth is sampled to tell power-law blow-up from exponential growth
_GROWTH_LEVELS = (1e6, 1e8, 1e10)


def _level_time(t, v, level):
    k = np.flatnonzero(v >= level)
    if k.size == 0:
        return None
    k = k[0]
    if k == 0:
        return float(t[0])
    lv0, lv1 = math.log(v[k - 1]), math.log(v[k])
    w = (math.log(level) - lv0) / (lv1 - lv0) if lv1 > lv0 else 1.0
    return float(t[k - 1] + w * (t[k] - t[k - 1]))


def estimate_blowup_time(model: FluxModel, q0: float, p0: float, max_horizon: float = 50.0,
                         opts=None) -> Optional[float]:
    """Finite blow-up time of the characteristic from ``(q0, p0)``, or ``None``.

    The horizon is doubled from 1 up to ``max_horizon``. Growth past the
    threshold only counts as blow-up if the times needed to gain successive
    factors of 100 shrink geometrically; exponential growth does not.
    """
    o = replace(CharacteristicOptions.coerce(opts), threshold=_GROWTH_LEVELS[-1], interface_margin=0.0)
    ts, qs, ps, dq = [], [], [], []
    t0, q, p = 0.0, float(q0), float(p0)
    horizon = 1.0
    cause = REACHED_HORIZON
    while True:
        span = min(horizon, max_horizon) - t0
        if span > 0:
            try:
                tr = integrate_characteristic(model, q, p, span, o)
            except StiffnessError:
                return None
            ts.append(tr.t + t0)
            qs.append(tr.q)
            ps.append(tr.p)
            dq.append(model.fu(tr.q, tr.p))
            t0, q, p = t0 + tr.t_end, float(tr.q[-1]), float(tr.p[-1])
            cause = tr.termination.cause
        if cause != REACHED_HORIZON or horizon >= max_horizon:
            break
        horizon *= 2.0
    if cause not in (VALUE_BLOWUP, POSITION_BLOWUP):
        return None
    t = np.concatenate(ts)
    qv, pv, dqv = np.concatenate(qs), np.concatenate(ps), np.concatenate(dq)
    v = np.abs(pv) if cause == VALUE_BLOWUP else np.abs(qv)
    t1, t2, t3 = (_level_time(t, v, lv) for lv in _GROWTH_LEVELS)
    if None in (t1, t2, t3) or t2 <= t1 or (t3 - t2) / (t2 - t1) >= 0.5:
        return None
    n = min(o.fit_samples, len(t))
    if cause == VALUE_BLOWUP:
        return _reciprocal_fit(t[-n:], pv[-n:])
    return _log_rate_fit(t[-n:], qv[-n:], dqv[-n:])


def write_manifest(trajectories: Sequence[CharacteristicTrajectory], path, extra: Optional[dict] = None) -> dict:
    """Batch manifest listing termination causes and blow-up estimates."""
    data = {"trajectories": [tr.summary() for tr in trajectories]}
    if extra:
        data.update(extra)
    from .serialize import dumps

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(data))
    return data


# -- closed forms for the catalog fluxes --------------------------------------------

def flipping_closed_form(q0: float, p0: float, t):
    """``g=x, h=u^2``: ``p = 1/(t + 1/p0)``, ``q = q0 (1 + t p0)^2``."""
    t = np.asarray(t, dtype=float)
    return q0 * (1.0 + t * p0) ** 2, p0 / (1.0 + t * p0)


def quadratic_g_closed_form(q0: float, p0: float, t):
    """``g=x^2, h=u^2``: ``q = q0 e^{Ct}``, ``p = p0 e^{-Ct}`` with ``C = 2 q0 p0``."""
    t = np.asarray(t, dtype=float)
    c = 2.0 * q0 * p0
    return q0 * np.exp(c * t), p0 * np.exp(-c * t)


def coercive_closed_form(q0: float, t):
    """``f = x u^2 + u^4`` from ``p0 = -1``: ``p = 1/(t-1)``, ``q = (q0+1)(1-t)^2 - (1-t)^{-2}``."""
    t = np.asarray(t, dtype=float)
    s = 1.0 - t
    return (q0 + 1.0) * s**2 - s**-2.0, -1.0 / s

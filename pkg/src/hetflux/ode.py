"""Dormand-Prince 5(4) integrator with step hooks and Hermite dense output.

scipy's ``solve_ivp`` does not let a caller modify the state after each
accepted step, which the characteristic solver needs for its conservation
projection, so the tableau is implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class StiffnessError(RuntimeError):
    """Step size underflow. ``t`` and ``y`` hold the last accepted state."""

    def __init__(self, message, t, y):
        super().__init__(message)
        self.t = t
        self.y = np.array(y, dtype=float)


@dataclass
class OdeResult:
    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    n_steps: int
    n_rejected: int
    stopped: Optional[object] = None

    def dense(self) -> "DenseTrajectory":
        return DenseTrajectory(self.t, self.y, self.dy)


class DenseTrajectory:
    """Piecewise cubic Hermite interpolant through ``(t_i, y_i, y'_i)``."""

    def __init__(self, t, y, dy):
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.dy = np.asarray(dy, dtype=float)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
            self.dy = self.dy[:, None]
            self._scalar = True
        else:
            self._scalar = False

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def _locate(self, s):
        i = np.searchsorted(self.t, s, side="right") - 1
        return np.clip(i, 0, max(len(self.t) - 2, 0))

    def __call__(self, s, derivative: bool = False):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if len(self.t) == 1:
            out = np.repeat(self.dy[:1] * 0 if derivative else self.y[:1], len(s_arr), axis=0)
        else:
            i = self._locate(s_arr)
            t0, t1 = self.t[i], self.t[i + 1]
            h = (t1 - t0)[:, None]
            th = ((s_arr - t0) / (t1 - t0))[:, None]
            y0, y1 = self.y[i], self.y[i + 1]
            d0, d1 = self.dy[i], self.dy[i + 1]
            if not derivative:
                h00 = 2 * th**3 - 3 * th**2 + 1
                h10 = th**3 - 2 * th**2 + th
                h01 = -2 * th**3 + 3 * th**2
                h11 = th**3 - th**2
                out = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
            else:
                g00 = (6 * th**2 - 6 * th) / h
                g10 = 3 * th**2 - 4 * th + 1
                g01 = (-6 * th**2 + 6 * th) / h
                g11 = 3 * th**2 - 2 * th
                out = g00 * y0 + g10 * d0 + g01 * y1 + g11 * d1
        if self._scalar:
            out = out[:, 0]
        if np.ndim(s) == 0:
            return out[0]
        return out


def dopri5(fun: Callable, t0: float, y0, t_end: float, rtol: float = 1e-9, atol: float = 1e-12,
           h0: Optional[float] = None, max_step: float = math.inf,
           valid: Optional[Callable] = None, project: Optional[Callable] = None,
           stop: Optional[Callable] = None, max_steps: int = 1_000_000) -> OdeResult:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t_end``.

    Args:
        valid: ``valid(t, y) -> bool``; a trial step landing on an invalid
            state is rejected and retried with a smaller step.
        project: ``project(t, y) -> y`` applied after every accepted step.
        stop: ``stop(t, y) -> object``; a truthy return ends integration and
            is stored in ``OdeResult.stopped``.

    Raises:
        StiffnessError: if the step size underflows before ``t_end``.
    """
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    f = np.asarray(fun(t, y), dtype=float)
    ts, ys, fs = [t], [y.copy()], [f.copy()]
    if span == 0:
        return OdeResult(np.array(ts), np.array(ys), np.array(fs), 0, 0)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.linalg.norm(y / scale) / math.sqrt(y.size)
        d1 = np.linalg.norm(f / scale) / math.sqrt(y.size)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, span, max_step)
    else:
        h = min(abs(h0), span, max_step)
    n_steps = n_rej = 0
    stopped = None
    k = np.empty((7, y.size))
    while direction * (t_end - t) > 0:
        if n_steps >= max_steps:
            raise StiffnessError(f"step budget exhausted at t={t}", t, y)
        h = min(h, abs(t_end - t), max_step)
        if h <= 1e-15 * max(1.0, abs(t)):
            raise StiffnessError(f"step size underflow at t={t}", t, y)
        hs = direction * h
        k[0] = f
        for i in range(1, 7):
            yi = y + hs * np.dot(_A[i], k[:i])
            k[i] = fun(t + _C[i] * hs, yi)
        y_new = y + hs * np.dot(_B, k)
        err_vec = hs * np.dot(_E, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(all="ignore"):
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        ok = np.isfinite(err) and np.all(np.isfinite(y_new))
        t_new = t + hs if abs(t_end - (t + hs)) > 1e-14 * max(1.0, abs(t_end)) else t_end
        if ok and valid is not None and not valid(t_new, y_new):
            ok = False
            err = math.inf
        if ok and err <= 1.0:
            if project is not None:
                y_new = np.asarray(project(t_new, y_new), dtype=float)
                f_new = np.asarray(fun(t_new, y_new), dtype=float)
            else:
                f_new = k[6].copy()
            t, y, f = t_new, y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f.copy())
            n_steps += 1
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
            if stop is not None:
                stopped = stop(t, y)
                if stopped:
                    break
        else:
            n_rej += 1
            if np.isfinite(err):
                h *= max(0.1, 0.9 * err ** -0.2)
            else:
                h *= 0.25
    return OdeResult(np.array(ts), np.array(ys), np.array(fs), n_steps, n_rej, stopped)

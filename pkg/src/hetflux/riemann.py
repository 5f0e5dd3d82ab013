"""Riemann problems between adjacent stationary branches.

States are labelled by the signed flux ``F = sgn(u) f(x, u)``. For a convex
``h`` the map ``u -> F`` is increasing where ``g > 0`` and decreasing where
``g < 0``, so in both cases a jump is a shock exactly when ``F_l > F_r``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .flux import FluxModel, INTERFACE_MARGIN, StationaryBranch, branch_for_level

SHOCK = "shock"
RAREFACTION = "rarefaction"
CONTACT_TRIVIAL = "contact_trivial"

FAN_EDGE = "fan_edge"
INTERFACE = "interface"


class DegenerateJumpError(ValueError):
    pass


class InterfaceJumpError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """A merge produced a rarefaction, which the scheme rules out."""


_ids = itertools.count()


def _state(model: FluxModel, x: float, s) -> float:
    if isinstance(s, StationaryBranch):
        return float(s(x))
    return float(s)


def _level(model: FluxModel, x: float, s) -> float:
    if isinstance(s, StationaryBranch):
        return s.signed_level
    return float(model.signed_flux(x, float(s)))


def classify_jump(model: FluxModel, x: float, left, right, margin: float = INTERFACE_MARGIN) -> str:
    """``shock``, ``rarefaction`` or ``contact_trivial`` for the jump at ``x``.

    ``left`` and ``right`` are stationary branches or plain state values.
    """
    gx = float(model.g(x)) if model.is_multiplicative else 1.0
    if gx == 0.0 or model.interface_distance(x) <= margin:
        raise InterfaceJumpError(f"x={x} lies on the interface margin")
    ul, ur = _state(model, x, left), _state(model, x, right)
    if ul == ur:
        return CONTACT_TRIVIAL
    # for g > 0 the flux is convex in u, for g < 0 concave
    if (ul > ur) == (gx > 0):
        return SHOCK
    return RAREFACTION


def rh_speed(model: FluxModel, x: float, u_l: float, u_r: float) -> float:
    """Rankine-Hugoniot speed ``(f(x,u_r) - f(x,u_l)) / (u_r - u_l)``."""
    if u_l == u_r:
        raise DegenerateJumpError("rh_speed needs u_l != u_r")
    return float((model.f(x, u_r) - model.f(x, u_l)) / (u_r - u_l))


def rh_speed_array(model: FluxModel, x, u_l, u_r):
    """Vectorised RH speed; equal states give the characteristic speed ``f_u``."""
    x, u_l, u_r = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, u_l, u_r)))
    du = u_r - u_l
    with np.errstate(all="ignore"):
        s = (model.f(x, u_r) - model.f(x, u_l)) / du
    return np.where(du == 0, model.fu(x, u_l), s)


def component(model: FluxModel, x: float, window=(-1e3, 1e3)) -> tuple:
    """Maximal interval of ``{g != 0}`` containing ``x``."""
    if not model.is_multiplicative:
        return (-math.inf, math.inf)
    pts = model.zero_points(window)
    left = pts[pts < x]
    right = pts[pts > x]
    return (float(left[-1]) if left.size else -math.inf, float(right[0]) if right.size else math.inf)


@dataclass(eq=False)
class Front:
    """A discontinuity between signed flux levels ``F_l`` (left) and ``F_r`` (right).

    ``trajectory`` is a dense interpolant of ``y(t)`` on ``[birth_time, end]``;
    static interface fronts have none.
    """

    kind: str
    F_l: float
    F_r: float
    position: float
    birth_time: float
    model: FluxModel = field(repr=False)
    domain: tuple = (-math.inf, math.inf)
    id: int = field(default_factory=lambda: next(_ids))
    trajectory: Optional[object] = field(default=None, repr=False)
    death_time: Optional[float] = None
    parents: tuple = ()

    @property
    def is_static(self) -> bool:
        return self.kind == INTERFACE

    @property
    def left(self) -> StationaryBranch:
        return branch_for_level(self.model, self.F_l, self.domain)

    @property
    def right(self) -> StationaryBranch:
        return branch_for_level(self.model, self.F_r, self.domain)

    def states(self, y):
        """``(u_l, u_r)`` at position(s) ``y``."""
        return self.model.u_from_level(self.F_l, y), self.model.u_from_level(self.F_r, y)

    def speed(self, y):
        """RH speed of this jump at position(s) ``y``."""
        if self.is_static:
            return np.zeros_like(np.asarray(y, dtype=float))
        if np.ndim(y) == 0 or np.size(y) == 1:
            fast = self._fast_speed()
            if fast is not None:
                v = fast(float(np.ravel(y)[0]))
                return v if np.ndim(y) == 0 else np.array([v])
        ul, ur = self.states(np.asarray(y, dtype=float))
        return rh_speed_array(self.model, y, ul, ur)

    def _fast_speed(self):
        if not hasattr(self, "_fast"):
            self._fast = self.model.level_speed_fn(self.F_l, self.F_r) if self.model.is_multiplicative else None
        return self._fast

    def end_time(self) -> float:
        if self.trajectory is not None:
            return float(self.trajectory.t1)
        return math.inf

    def alive(self, t: float) -> bool:
        if t < self.birth_time:
            return False
        return self.death_time is None or t <= self.death_time

    def y(self, t):
        """Position at time(s) ``t``; clamped to the stored trajectory range."""
        if self.trajectory is None:
            return np.full(np.shape(t), self.position) if np.ndim(t) else self.position
        tt = np.clip(t, self.trajectory.t0, self.trajectory.t1)
        return self.trajectory(tt)

    def ydot(self, t):
        if self.trajectory is None:
            return np.zeros(np.shape(t)) if np.ndim(t) else 0.0
        tt = np.clip(t, self.trajectory.t0, self.trajectory.t1)
        return self.trajectory(tt, derivative=True)

    def to_dict(self, n_samples: int = 0) -> dict:
        out = {
            "id": self.id,
            "kind": self.kind,
            "F_l": self.F_l,
            "F_r": self.F_r,
            "birth_time": self.birth_time,
            "birth_position": self.position,
            "death_time": self.death_time,
            "parents": list(self.parents),
        }
        if self.trajectory is not None:
            tr = self.trajectory
            out["trajectory"] = {"t": tr.t.tolist(), "y": np.ravel(tr.y).tolist()}
        return out


@dataclass(frozen=True)
class RiemannFan:
    fronts: tuple
    levels: tuple
    kind: str

    def __len__(self):
        return len(self.fronts)


def solve_riemann(model: FluxModel, x: float, t: float, left, right, delta: float,
                  domain: Optional[tuple] = None) -> RiemannFan:
    """Fronts resolving the jump ``left | right`` at ``(x, t)``.

    A shock gives one front. A rarefaction gives ``ceil(|F_r - F_l| / delta)``
    fan edges at equal spacing in the signed flux; each edge is itself a small
    jump moving with its own RH speed.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    kind = classify_jump(model, x, left, right)
    F_l, F_r = _level(model, x, left), _level(model, x, right)
    dom = domain if domain is not None else component(model, x)
    # distinct states can share a level when g h(u) underflows; fronts carry levels, so there is no jump
    if kind == CONTACT_TRIVIAL or F_l == F_r:
        return RiemannFan((), (F_l,), CONTACT_TRIVIAL)
    if kind == SHOCK:
        return RiemannFan((Front(SHOCK, F_l, F_r, float(x), float(t), model, dom),), (F_l, F_r), kind)
    n = max(1, math.ceil(abs(F_r - F_l) / delta - 1e-12))
    levels = np.linspace(F_l, F_r, n + 1)
    levels[0], levels[-1] = F_l, F_r
    fronts = tuple(Front(FAN_EDGE, float(a), float(b), float(x), float(t), model, dom)
                   for a, b in zip(levels[:-1], levels[1:]))
    return RiemannFan(fronts, tuple(float(v) for v in levels), kind)


def resolve_interaction(model: FluxModel, x: float, t: float, colliding: Sequence[Front],
                        domain: Optional[tuple] = None) -> Optional[Front]:
    """Merge colliding fronts (ordered left to right) into one shock.

    Returns ``None`` when the outer levels agree, in which case the fronts
    simply disappear.

    Raises:
        ConsistencyError: if the merged jump would be a rarefaction.
    """
    if len(colliding) < 2:
        raise ValueError("an interaction needs at least two fronts")
    F_l, F_r = colliding[0].F_l, colliding[-1].F_r
    if F_l == F_r:
        return None
    if F_l < F_r:
        raise ConsistencyError(
            f"merge at x={x}, t={t} of fronts {[f.id for f in colliding]} gives a rarefaction "
            f"(F_l={F_l}, F_r={F_r})")
    dom = domain if domain is not None else colliding[0].domain
    return Front(SHOCK, F_l, F_r, float(x), float(t), model, dom,
                 parents=tuple(f.id for f in colliding))

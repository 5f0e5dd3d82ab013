"""Heterogeneous fluxes ``f(x, u) = g(x) h(u)`` and their stationary solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as E

HOLDS = "holds"
FAILS = "fails"
UNCHECKED = "unchecked"

ASSUMPTIONS = ("R", "S", "SC", "LL", "B", "V", "CG")

#: distance branch domains must keep from zeros of g
INTERFACE_MARGIN = 1e-8


class FluxError(ValueError):
    """Malformed flux definition."""


class NotMultiplicativeError(FluxError):
    """Raised when an operation needs ``f = g(x) h(u)`` but got a general flux."""


class BranchError(ValueError):
    """Infeasible stationary branch request."""


class InfeasibleBranchError(BranchError):
    pass


class InterfaceCrossingError(BranchError):
    pass


@dataclass(frozen=True)
class ZeroFeature:
    """A boundary point of ``G = {g = 0}`` (or an interval on which ``g`` vanishes)."""

    location: float
    interval: Optional[tuple] = None
    vanishing_order: Optional[int] = None
    K: Optional[float] = None
    radius: Optional[float] = None
    derivative: Optional[float] = None

    @property
    def points(self) -> tuple:
        if self.interval is None:
            return (self.location,)
        return tuple(self.interval)

    def to_dict(self) -> dict:
        return {
            "location": self.location,
            "interval": list(self.interval) if self.interval else None,
            "vanishing_order": self.vanishing_order,
            "K": self.K,
            "radius": self.radius,
            "derivative": self.derivative,
        }


@dataclass(frozen=True)
class Verdict:
    status: str
    why: str
    constants: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AssumptionReport:
    verdicts: dict
    window: tuple
    multiplicative: bool = True

    def __getitem__(self, name: str) -> Verdict:
        return self.verdicts[name]

    def status(self, name: str) -> str:
        return self.verdicts[name].status

    @property
    def eta(self) -> Optional[float]:
        return self.verdicts["V"].constants.get("eta")

    @property
    def growth_exponent(self) -> Optional[float]:
        """``eta + epsilon`` certified for (CG), if it holds."""
        c = self.verdicts["CG"].constants
        if "epsilon" in c and self.eta is not None:
            return self.eta + c["epsilon"]
        return None

    def ok(self) -> bool:
        return all(v.status == HOLDS for v in self.verdicts.values())

    def failed(self) -> list:
        return [k for k, v in self.verdicts.items() if v.status == FAILS]

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "multiplicative": self.multiplicative,
            "assumptions": {
                k: {"verdict": v.status, "justification": v.why, "constants": dict(v.constants)}
                for k, v in self.verdicts.items()
            },
        }


def _power_form(h: E.Expr):
    """Match ``c*u^n`` or ``c*abs(u)^s``; return ``(c, n, uses_abs)`` or None."""
    c = 1.0
    core = h
    if isinstance(h, E.Mul) and len(h.factors) == 2 and isinstance(h.factors[0], E.Const):
        c, core = h.factors[0].value, h.factors[1]
    if isinstance(core, E.Pow):
        if core.base == E.U and float(core.exponent).is_integer():
            return c, core.exponent, False
        if core.base == E.Abs(E.U):
            return c, core.exponent, True
    return None


class FluxModel:
    """A closed-form flux.

    Use :meth:`multiplicative` for ``g(x) h(u)`` and :meth:`general` for any
    closed-form ``f(x, u)``. Compiled callables (``f``, ``fu``, ``fx``, ``fuu``
    and, for multiplicative fluxes, ``g``, ``dg``, ``h``, ``dh``, ``d2h``) are
    numpy-vectorised.
    """

    def __init__(self, f: E.Expr, g: Optional[E.Expr] = None, h: Optional[E.Expr] = None,
                 name: Optional[str] = None):
        self.kind = "multiplicative" if g is not None else "general"
        self.f_expr = f
        self.g_expr = g
        self.h_expr = h
        self.name = name or str(f)
        if not f.free_vars() <= {"x", "u"}:
            raise FluxError(f"flux may only use x and u: {f}")
        self.fu_expr = f.diff("u")
        self.fx_expr = f.diff("x")
        self.fuu_expr = self.fu_expr.diff("u")
        self.f = f.compile(("x", "u"))
        self.fu = self.fu_expr.compile(("x", "u"))
        self.fx = self.fx_expr.compile(("x", "u"))
        self.fuu = self.fuu_expr.compile(("x", "u"))
        if g is not None:
            if not g.free_vars() <= {"x"}:
                raise FluxError(f"g may only depend on x: {g}")
            if not h.free_vars() <= {"u"}:
                raise FluxError(f"h may only depend on u: {h}")
            self.dg_expr = g.diff("x")
            self.dh_expr = h.diff("u")
            self.d2h_expr = self.dh_expr.diff("u")
            self.g = g.compile(("x",))
            self.dg = self.dg_expr.compile(("x",))
            self.h = h.compile(("u",))
            self.dh = self.dh_expr.compile(("u",))
            self.d2h = self.d2h_expr.compile(("u",))
            self._power = _power_form(h)

    @classmethod
    def multiplicative(cls, g, h, name: Optional[str] = None) -> "FluxModel":
        g = E.as_expr(g)
        h = E.as_expr(h)
        return cls(E.mul(g, h), g=g, h=h, name=name or f"({g})*({h})")

    @classmethod
    def general(cls, f, name: Optional[str] = None) -> "FluxModel":
        return cls(E.as_expr(f), name=name)

    @classmethod
    def from_spec(cls, spec: dict) -> "FluxModel":
        kind = spec.get("kind", "multiplicative")
        try:
            if kind == "multiplicative":
                return cls.multiplicative(spec["g"], spec["h"], name=spec.get("name"))
            if kind in ("general", "general_closed_form"):
                return cls.general(spec["f"], name=spec.get("name"))
        except KeyError as exc:
            raise FluxError(f"flux spec missing key {exc}") from None
        raise FluxError(f"unknown flux kind {kind!r}")

    def to_spec(self) -> dict:
        if self.is_multiplicative:
            return {"kind": "multiplicative", "g": str(self.g_expr), "h": str(self.h_expr)}
        return {"kind": "general", "f": str(self.f_expr)}

    @property
    def is_multiplicative(self) -> bool:
        return self.kind == "multiplicative"

    def require_multiplicative(self, what: str = "this operation"):
        if not self.is_multiplicative:
            raise NotMultiplicativeError(f"{what} needs a flux of the form g(x)h(u); got {self.name}")

    def __repr__(self):
        return f"FluxModel({self.name!r})"

    # -- derived quantities ---------------------------------------------------

    def signed_flux(self, x, u):
        """``sgn(u) f(x, u)``, the variable the front tracker discretises."""
        return np.sign(u) * self.f(x, u)

    def invert_h(self, target, sign: int, tol: float = 1e-12):
        """Solve ``h(u) = target`` for ``u`` on the branch ``sign(u) = sign``.

        Vectorised over ``target``. ``h`` must be monotone on the branch.
        Entries with ``target`` outside the branch's range become ``nan``.
        """
        self.require_multiplicative("branch inversion")
        target = np.asarray(target, dtype=float)
        if sign == 0:
            return np.zeros_like(target)
        h0 = float(self.h(0.0))
        direction = np.sign(float(self.h(float(sign))) - h0)
        if direction == 0:
            raise FluxError("h is flat on the requested branch")
        feasible = (target - h0) * direction >= 0
        if self._power is not None:
            c, n, _ = self._power
            with np.errstate(all="ignore"):
                mag = np.abs(target / c) ** (1.0 / n)
            out = sign * mag
        else:
            out = sign * self._bracketed_root(target, sign, direction, tol)
        return np.where(feasible, out, np.nan)

    def _bracketed_root(self, target, sign, direction, tol):
        t = np.atleast_1d(target).astype(float)
        phi = lambda m: direction * (self.h(sign * m) - t)
        dphi = lambda m: direction * sign * self.dh(sign * m)
        lo = np.zeros_like(t)
        hi = np.ones_like(t)
        for _ in range(2100):
            bad = phi(hi) < 0
            if not bad.any():
                break
            hi = np.where(bad, hi * 2.0, hi)
        m = 0.5 * (lo + hi)
        scale = np.maximum(1.0, np.abs(t))
        for _ in range(200):
            val = phi(m)
            lo = np.where(val < 0, m, lo)
            hi = np.where(val >= 0, m, hi)
            d = dphi(m)
            with np.errstate(all="ignore"):
                newton = m - val / d
            ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
            m_new = np.where(ok, newton, 0.5 * (lo + hi))
            done = (np.abs(val) <= tol * scale) | (hi - lo <= 4e-16 * np.maximum(1.0, hi))
            m = np.where(done, m, m_new)
            if done.all():
                break
        return m.reshape(np.shape(target))

    def level_speed_fn(self, F_l: float, F_r: float):
        """Scalar RH speed ``y -> s(y)`` of the jump between two signed flux levels.

        For convex ``h >= 0`` one has ``f = sgn(g) |F|`` on every branch, so only
        the states need inverting. Falls back to the vectorised path when ``h``
        is not a plain power.
        """
        self.require_multiplicative("level speeds")
        if self._power is None or F_l == F_r:
            return None
        c, n, _ = self._power
        g = self.g.raw
        dh = self.dh.raw
        inv = 1.0 / n
        aL, aR = abs(F_l), abs(F_r)
        sL, sR = math.copysign(1.0, F_l) if F_l else 0.0, math.copysign(1.0, F_r) if F_r else 0.0

        def speed(y):
            gy = float(g(y))
            ag = abs(gy)
            sg = 1.0 if gy > 0 else -1.0
            ul = sL * sg * (aL / (ag * c)) ** inv if aL else 0.0
            ur = sR * sg * (aR / (ag * c)) ** inv if aR else 0.0
            du = ur - ul
            if du == 0.0:
                return gy * float(dh(ul))
            return sg * (aR - aL) / du

        return speed

    def u_from_level(self, level, x):
        """State ``u`` at ``x`` on the stationary branch of signed flux ``level``.

        Vectorised over ``x``; ``level`` is a scalar. At zeros of ``g`` the
        result is ``nan`` unless the level is zero.
        """
        x = np.asarray(x, dtype=float)
        if level == 0:
            return np.zeros_like(x)
        gx = self.g(x)
        sg = np.sign(gx)
        out = np.full_like(x, np.nan, dtype=float)
        with np.errstate(all="ignore"):
            target = abs(level) / np.abs(gx)
        s = int(np.sign(level))
        for region in (1.0, -1.0):
            m = sg == region
            if m.any():
                out[m] = self.invert_h(target[m], int(s * region))
        return out

    # -- zero set ---------------------------------------------------------------

    def zero_set(self, window: Sequence[float] = (-10.0, 10.0), n: int = 4001) -> tuple:
        """Zero features of ``g`` in ``window`` (empty for general fluxes)."""
        if not self.is_multiplicative:
            return ()
        return _zero_set(self, float(window[0]), float(window[1]), int(n))

    def zero_points(self, window=(-10.0, 10.0)) -> np.ndarray:
        pts = []
        for z in self.zero_set(window):
            pts.extend(z.points)
        return np.array(sorted(pts), dtype=float)

    def interface_distance(self, x: float, window=(-1e3, 1e3)) -> float:
        pts = self.zero_points(window)
        if pts.size == 0:
            return math.inf
        return float(np.min(np.abs(pts - x)))


_ZERO_CACHE: dict = {}


def _zero_set(model: FluxModel, lo: float, hi: float, n: int) -> tuple:
    key = (id(model), lo, hi, n)
    hit = _ZERO_CACHE.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]
    feats = _find_zeros(model, lo, hi, n)
    _ZERO_CACHE[key] = (model, feats)
    return feats


def _find_zeros(model: FluxModel, lo: float, hi: float, n: int) -> tuple:
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise FluxError(f"zero search needs a bounded window, got ({lo}, {hi})")
    g = model.g
    xs = np.linspace(lo, hi, n)
    if lo < 0 < hi and 0.0 not in xs:
        xs = np.sort(np.append(xs, 0.0))
    vals = np.broadcast_to(g(xs), xs.shape).astype(float)
    scale = max(1.0, float(np.max(np.abs(vals))))
    ztol = 1e-14 * scale
    zero = np.abs(vals) <= ztol
    roots = []
    intervals = []
    i = 0
    while i < len(xs):
        if zero[i]:
            j = i
            while j + 1 < len(xs) and zero[j + 1]:
                j += 1
            if j == i:
                roots.append(xs[i])
            else:
                a = _refine_edge(g, xs[i - 1], xs[i], ztol) if i > 0 else xs[i]
                b = _refine_edge(g, xs[j + 1], xs[j], ztol) if j + 1 < len(xs) else xs[j]
                intervals.append((a, b))
            i = j + 1
        else:
            i += 1
    s = np.sign(vals)
    for k in range(len(xs) - 1):
        if s[k] * s[k + 1] < 0:
            roots.append(brentq(lambda t: float(g(t)), xs[k], xs[k + 1], xtol=1e-15, rtol=1e-15))
    # even-order zeros between samples: |g| has a local minimum reaching zero
    dvals = np.broadcast_to(model.dg(xs), xs.shape)
    ds = np.sign(dvals)
    for k in range(len(xs) - 1):
        if ds[k] * ds[k + 1] < 0 and not (zero[k] or zero[k + 1]):
            r = brentq(lambda t: float(model.dg(t)), xs[k], xs[k + 1], xtol=1e-15)
            if abs(float(g(r))) <= 1e-12 * scale:
                roots.append(r)
    roots = sorted(roots)
    merged = []
    for r in roots:
        if merged and abs(r - merged[-1]) < 1e-12 * max(1.0, abs(r)):
            continue
        if any(a - 1e-12 <= r <= b + 1e-12 for a, b in intervals):
            continue
        merged.append(float(r))
    feats = [ZeroFeature(location=r, derivative=float(model.dg(r))) for r in merged]
    feats += [ZeroFeature(location=float(a), interval=(float(a), float(b))) for a, b in intervals]
    feats.sort(key=lambda z: z.location)
    return tuple(feats)


def _refine_edge(g, outside: float, inside: float, ztol: float) -> float:
    for _ in range(200):
        mid = 0.5 * (outside + inside)
        if mid in (outside, inside):
            break
        if abs(float(g(mid))) <= ztol:
            inside = mid
        else:
            outside = mid
    return float(inside)


# -- assumptions ---------------------------------------------------------------

def _order_of_vanishing(model: FluxModel, z: ZeroFeature, window, neighbours, max_order=8):
    """Smallest integer order certified at a point zero, with ``K`` and radius."""
    xbar = z.location
    deriv = model.g_expr
    order = None
    coef = None
    for j in range(1, max_order + 1):
        deriv = deriv.diff("x")
        val = float(np.broadcast_to(deriv.compile(("x",))(xbar), ()))
        if not math.isfinite(val):
            return None
        if abs(val) > 1e-10:
            order, coef = j, val
            break
    if order is None:
        return None
    gaps = [abs(p - xbar) for p in neighbours if p != xbar]
    radius = min([1.0, 0.5 * (window[1] - window[0])] + [0.5 * d for d in gaps])
    for _ in range(40):
        offs = np.concatenate([-np.geomspace(radius, radius * 1e-6, 400),
                               np.geomspace(radius * 1e-6, radius, 400)])
        xs = xbar + offs
        ratio = np.abs(model.g(xs)) / np.abs(offs) ** order
        K = float(np.min(ratio))
        if K > 1e-3 * abs(coef) / math.factorial(order):
            return order, K, radius
        radius *= 0.5
    return None


def _one_sided_order(model: FluxModel, edge: float, side: int, max_order=8):
    radius = 1e-2
    offs = side * np.geomspace(1e-7, radius, 300)
    gx = np.abs(model.g(edge + offs))
    for eta in range(1, max_order + 1):
        K = float(np.min(gx / np.abs(offs) ** eta))
        if K > 1e-8:
            return eta, K, radius
    return None


def validate_assumptions(model: FluxModel, window: Sequence[float] = (-2.0, 2.0),
                         u_max: float = 10.0, growth_max: float = 1e4) -> AssumptionReport:
    """Certify the structural assumptions on ``window`` by sampling.

    ``u_max`` bounds the state grid used for (R), (SC) and (LL); (CG) and
    (LL) growth rates are sampled on ``1 <= |u| <= growth_max``. Anything that
    cannot be decided on the sampled region is reported ``unchecked``.
    """
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise FluxError(f"validation window must be bounded, got {window!r}")
    if not model.is_multiplicative:
        why = "flux is not of the form g(x)h(u); structural assumptions do not apply"
        return AssumptionReport({k: Verdict(UNCHECKED, why) for k in ASSUMPTIONS},
                                (lo, hi), multiplicative=False)
    v = {}
    us = np.unique(np.concatenate([np.linspace(-u_max, u_max, 4001), [0.0]]))
    xs = np.linspace(lo, hi, 2001)
    hv, dhv, d2hv = (np.broadcast_to(fn(us), us.shape) for fn in (model.h, model.dh, model.d2h))
    feats = model.zero_set((lo, hi))
    zpts = np.array([p for z in feats for p in z.points])

    # (R)
    gv = np.broadcast_to(model.g(xs), xs.shape)
    far = np.ones_like(xs, dtype=bool)
    if zpts.size:
        far = np.min(np.abs(xs[:, None] - zpts[None, :]), axis=1) > 1e-6
    g2 = np.broadcast_to(model.dg_expr.diff("x").compile(("x",))(xs[far]), xs[far].shape)
    if not (np.all(np.isfinite(hv)) and np.all(np.isfinite(dhv)) and np.all(np.isfinite(d2hv))):
        v["R"] = Verdict(FAILS, "h, h' or h'' is not finite on the state grid")
    elif not (np.all(np.isfinite(gv)) and np.all(np.isfinite(g2))):
        v["R"] = Verdict(FAILS, "g is not finite, or not C^2 away from its zeros")
    else:
        v["R"] = Verdict(HOLDS, "closed-form h, h', h'' and g'' finite on the sampled window")

    # (S)
    h0, dh0 = float(model.h(0.0)), float(model.dh(0.0))
    if h0 == 0.0 and dh0 == 0.0:
        v["S"] = Verdict(HOLDS, "h(0) = h'(0) = 0 exactly")
    else:
        v["S"] = Verdict(FAILS, f"h(0) = {h0!r}, h'(0) = {dh0!r}")

    # (SC)
    inc = np.all(np.diff(dhv) > 0)
    nonneg = np.all(d2hv >= 0)
    zero_runs = np.any((d2hv[:-1] == 0) & (d2hv[1:] == 0))
    if inc and nonneg and not zero_runs:
        v["SC"] = Verdict(HOLDS, f"h' strictly increasing on [-{u_max}, {u_max}], h'' >= 0 with isolated zeros")
    else:
        v["SC"] = Verdict(FAILS, "h' not strictly increasing on the sampled state grid")

    # (LL)
    mags = np.geomspace(1.0, growth_max, 2000)
    grid = np.concatenate([-mags[::-1], mags])
    hg = np.broadcast_to(model.h(grid), grid.shape)
    dhg = np.broadcast_to(model.dh(grid), grid.shape)
    if np.any(hg <= 0):
        v["LL"] = Verdict(FAILS, "h vanishes or is negative outside (-1, 1)")
        rho = None
    else:
        lip = np.abs(dhg / hg)
        L = float(np.max(lip))
        edge = max(lip[0], lip[-1])
        if edge >= L * (1 - 1e-9) and edge > 1.01 * min(lip[len(lip) // 2 - 1], lip[len(lip) // 2]):
            v["LL"] = Verdict(UNCHECKED, "|h'/h| still growing at the edge of the sampled range")
        else:
            v["LL"] = Verdict(HOLDS, f"|(log h)'| <= {L:.6g} on 1 <= |u| <= {growth_max:g}", {"L": L})
        rho = grid * dhg / hg

    # (B)
    if zpts.size > 1 and np.min(np.diff(zpts)) < 10 * (hi - lo) / 4000:
        v["B"] = Verdict(UNCHECKED, "zeros of g cluster at the sampling resolution")
    else:
        v["B"] = Verdict(HOLDS, f"{zpts.size} boundary point(s) of G on the window")

    # (V)
    eta = None
    if not feats:
        eta = 1
        v["V"] = Verdict(HOLDS, "G is empty on the window; holds vacuously", {"eta": 1, "points": []})
    else:
        orders = []
        detail = []
        for z in feats:
            if z.interval is None:
                got = _order_of_vanishing(model, z, (lo, hi), zpts)
                if got is not None:
                    orders.append(got[0])
                    detail.append({"x": z.location, "eta": got[0], "K": got[1], "radius": got[2]})
                else:
                    orders.append(None)
            else:
                for edge, side in ((z.interval[0], -1), (z.interval[1], 1)):
                    got = _one_sided_order(model, edge, side)
                    orders.append(None if got is None else got[0])
                    if got is not None:
                        detail.append({"x": edge, "eta": got[0], "K": got[1], "radius": got[2]})
        if any(o is None for o in orders):
            v["V"] = Verdict(UNCHECKED, "no integer vanishing order certified at some zero", {"points": detail})
        else:
            eta = max(orders)
            v["V"] = Verdict(HOLDS, f"|g(x)| >= K|x - xbar|^{eta} near every zero",
                             {"eta": eta, "points": detail, "K": min(d["K"] for d in detail)})

    # (CG)
    if eta is None:
        v["CG"] = Verdict(UNCHECKED, "needs the vanishing order from (V)")
    elif rho is None:
        v["CG"] = Verdict(FAILS, "h is not positive for |u| > 1")
    else:
        r = float(np.min(rho))
        if r > eta + 1e-9:
            eps = r - eta
            C = float(np.min(hg / np.abs(grid) ** r))
            v["CG"] = Verdict(HOLDS, f"growth exponent {r:.6g} > eta = {eta}",
                              {"C": C, "epsilon": eps, "M": 1.0, "exponent": r})
        else:
            v["CG"] = Verdict(FAILS, f"growth exponent {r:.6g} does not exceed eta = {eta}",
                              {"exponent": r})
    return AssumptionReport({k: v[k] for k in ASSUMPTIONS}, (lo, hi))


# -- stationary branches -----------------------------------------------------------

_SIGN_NAMES = {"positive": 1, "negative": -1, "zero": 0, "+": 1, "-": -1, "0": 0}


def _as_sign(sign) -> int:
    if isinstance(sign, str):
        try:
            return _SIGN_NAMES[sign]
        except KeyError:
            raise BranchError(f"unknown branch sign {sign!r}") from None
    s = int(np.sign(sign))
    return s


@dataclass(frozen=True)
class StationaryBranch:
    """Stationary state ``u_r`` with ``g(x) h(u_r(x)) = flux_level`` on ``domain``."""

    model: FluxModel
    flux_level: float
    sign: int
    domain: tuple

    @property
    def signed_level(self) -> float:
        """The conserved value of ``sgn(u) f``."""
        return self.sign * self.flux_level

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.sign == 0:
            return np.zeros_like(x)
        with np.errstate(all="ignore"):
            target = self.flux_level / self.model.g(x)
        return self.model.invert_h(target, self.sign)

    def limit(self, x: float) -> float:
        """Value at ``x``, with ``±inf`` at a zero of ``g`` on a nonzero level."""
        if self.sign == 0:
            return 0.0
        if float(self.model.g(x)) == 0.0:
            return math.copysign(math.inf, self.sign)
        return float(self(x))

    def residual(self, x):
        return self.model.f(x, self(x)) - self.flux_level


def stationary_branch(model: FluxModel, flux_level: float, sign, domain: Sequence[float],
                      margin: float = INTERFACE_MARGIN) -> StationaryBranch:
    """Stationary solution of ``g(x) h(u) = flux_level`` on one sign branch.

    ``domain`` is an open interval that must not contain a zero of ``g``
    further than ``margin`` from its ends.
    """
    model.require_multiplicative("stationary_branch")
    s = _as_sign(sign)
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise BranchError(f"empty domain {domain!r}")
    if flux_level == 0:
        if s != 0:
            raise InfeasibleBranchError("level 0 admits only the zero branch")
        return StationaryBranch(model, 0.0, 0, (lo, hi))
    if s == 0:
        raise InfeasibleBranchError("the zero branch needs flux level 0")
    flo = max(lo, -1e3) if math.isfinite(lo) else min(hi, 0.0) - 1e3
    fhi = min(hi, 1e3) if math.isfinite(hi) else max(lo, 0.0) + 1e3
    for z in model.zero_set((min(flo, fhi - 1.0), fhi)):
        for p in z.points:
            if lo + margin < p < hi - margin:
                raise InterfaceCrossingError(f"g vanishes at x={p} inside {domain!r}")
    xs = np.linspace(flo, fhi, 513)[1:-1] if fhi > flo else np.array([0.5 * (flo + fhi)])
    gx = np.broadcast_to(model.g(xs), xs.shape)
    if np.any(gx == 0) or np.any(np.sign(gx) != np.sign(gx[0])):
        raise InterfaceCrossingError(f"g changes sign or vanishes in {domain!r}")
    target = flux_level / gx
    h0 = float(model.h(0.0))
    direction = np.sign(float(model.h(float(s))) - h0)
    if np.any((target - h0) * direction < 0):
        raise InfeasibleBranchError(
            f"h(u) = {flux_level}/g(x) has no solution with sign {s} on {domain!r}")
    return StationaryBranch(model, float(flux_level), s, (lo, hi))


def branch_for_level(model: FluxModel, level: float, domain: Sequence[float]) -> StationaryBranch:
    """Stationary branch of signed flux ``level`` on a domain where ``g`` has one sign."""
    lo, hi = float(domain[0]), float(domain[1])
    if level == 0:
        return StationaryBranch(model, 0.0, 0, (lo, hi))
    probe = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else (
        lo + 1.0 if math.isfinite(lo) else hi - 1.0)
    sg = int(np.sign(float(model.g(probe))))
    if sg == 0:
        raise InterfaceCrossingError(f"g vanishes at the domain probe {probe}")
    s = int(np.sign(level)) * sg
    return StationaryBranch(model, sg * abs(float(level)), s, (lo, hi))


# -- evaluation -------------------------------------------------------------------

def eval_flux(model: FluxModel, x, u):
    return model.f(x, u)


def eval_fu(model: FluxModel, x, u):
    return model.fu(x, u)


def eval_fx(model: FluxModel, x, u):
    return model.fx(x, u)

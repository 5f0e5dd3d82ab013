"""Closed-form fixtures with exact evaluators and their expected properties.

Expected properties and blow-up loci are declared data, never computed by
the modules under test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .characteristics import (coercive_closed_form, estimate_blowup_time, flipping_closed_form,
                              integrate_characteristic, quadratic_g_closed_form)
from .fields import ClosedFormField, Field, constant
from .flux import FluxModel
from .fronttracking import Datum
from .verifier import (EQUALITY, FAIL, PASS, VerificationReport, entropy_battery,
                       interface_condition, rh_residual, weak_solution_diagnostics)

NAMES = (
    "stat_equality",
    "shock_nonunique_family",
    "bounded_blowup",
    "power_family",
    "square_box_blowup",
    "no_blowup_quadratic_g",
    "global_illposed",
    "bad_data_no_weak",
)


class CatalogError(KeyError):
    pass


@dataclass(frozen=True)
class Curve:
    """Declared discontinuity curve ``y(t)`` with derivative, valid on ``[t0, t1]``."""

    y: Callable
    dy: Callable
    t0: float
    t1: float

    def samples(self, n: int = 200):
        t = np.linspace(self.t0, self.t1, n)
        return t, np.array([self.y(s) for s in t]), np.array([self.dy(s) for s in t])


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    model: FluxModel
    datum: Optional[Datum]
    field: Optional[Field]
    expected: dict
    params: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    characteristic: Optional[Callable] = None
    seeds: tuple = ()
    domain: Optional[tuple] = None
    t_samples: tuple = ()
    description: str = ""

    def evaluator(self, x, t):
        if self.field is None:
            raise CatalogError(f"{self.name} has no solution field")
        return self.field.evaluate(x, t)

    def curve(self, t, name: Optional[str] = None):
        key = name or next(iter(self.curves))
        return self.curves[key].y(t)

    def q(self, t, q0: float, p0: Optional[float] = None):
        return self.characteristic(t, q0, p0)[0]

    def p(self, t, q0: float, p0: Optional[float] = None):
        return self.characteristic(t, q0, p0)[1]

    def to_manifest(self, n_samples: int = 50) -> dict:
        fronts = []
        for i, (k, c) in enumerate(self.curves.items()):
            ts, ys, _ = c.samples(n_samples)
            fronts.append({"id": i, "kind": "shock", "name": k, "trajectory": {"t": ts.tolist(), "y": ys.tolist()}})
        traces = []
        clipped = False
        if self.field is not None:
            for z in self.field.singular_points():
                for t in self.t_samples or (0.0,):
                    l, r = self.field.trace(z, t, "-"), self.field.trace(z, t, "+")
                    clipped = clipped or math.isinf(l) or math.isinf(r)
                    traces.append({"x": z, "t": t, "left": l, "right": r})
        return {
            "kind": "catalog_entry",
            "name": self.name,
            "description": self.description,
            "flux": self.model.to_spec(),
            "params": {k: (str(v) if isinstance(v, str) else v) for k, v in self.params.items()},
            "expected": self.expected,
            "events": [],
            "fronts": fronts,
            "interface_traces": traces,
            "trace_clipped": clipped,
        }


def _flipping() -> FluxModel:
    return FluxModel.multiplicative("x", "u^2", name="x*u^2")


def _neg_sqrt_left(x, t=None):
    return -1.0 / np.sqrt(-x)


def _pos_sqrt(x, t=None):
    return 1.0 / np.sqrt(x)


def gamma(t):
    """Shock curve ``t^2/4`` for ``t > 0`` and 0 otherwise."""
    return t * t / 4.0 if t > 0 else 0.0


def _shocking_datum() -> Datum:
    return Datum([(-math.inf, 0.0, "-abs(x)^-0.5"), (0.0, math.inf, 0.0)], name="shocking")


def stat_equality() -> CatalogEntry:
    m = _flipping()
    values = [lambda x, t: _neg_sqrt_left(x), lambda x, t: _pos_sqrt(x)]
    fld = ClosedFormField(m, [lambda t: 0.0], values, name="stat_equality", stationary=True)
    return CatalogEntry(
        "stat_equality", m, Datum([(-math.inf, 0.0, "-abs(x)^-0.5"), (0.0, math.inf, "abs(x)^-0.5")]), fld,
        expected={"entropy": EQUALITY, "interface": FAIL, "flux_trace": "sgn(x)"},
        domain=((-2.0, 2.0), (0.0, 2.0)), t_samples=(0.5, 1.0),
        description="stationary sgn(x)/sqrt|x| for x*u^2; every entropy inequality holds with equality")


def shock_nonunique_family(lam=0.0) -> CatalogEntry:
    """``u_lam``: the stationary shock profile until ``t = lam``, then a right branch
    ``1/sqrt(x)`` behind the curve ``gamma(t - lam)``. ``lam = 'stationary'`` (or
    ``inf``) is the limit member that never moves."""
    m = _flipping()
    stationary = lam in ("stationary", None) or (isinstance(lam, (int, float)) and math.isinf(lam))
    if stationary:
        fld = ClosedFormField(m, [lambda t: 0.0], [lambda x, t: _neg_sqrt_left(x), constant(0.0)],
                              name="u_stationary", stationary=True)
        return CatalogEntry("shock_nonunique_family", m, _shocking_datum(), fld,
                            expected={"entropy": PASS, "interface": PASS}, params={"lambda": "stationary"},
                            domain=((-1.0, 3.0), (0.0, 3.5)), t_samples=(0.5, 1.0, 2.0, 3.0),
                            description="stationary member of the non-uniqueness family")
    lam = float(lam)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    y = lambda t: gamma(t - lam)
    fld = ClosedFormField(m, [lambda t: 0.0, y],
                          [lambda x, t: _neg_sqrt_left(x), lambda x, t: _pos_sqrt(x), constant(0.0)],
                          name=f"u_{lam:g}", time_breaks=(lam,) if lam > 0 else ())
    curve = Curve(y, lambda t: max(t - lam, 0.0) / 2.0, lam, lam + 4.0)
    return CatalogEntry("shock_nonunique_family", m, _shocking_datum(), fld,
                        expected={"entropy": PASS, "interface": FAIL}, params={"lambda": lam},
                        curves={"shock": curve}, domain=((-1.0, 3.0), (0.0, 3.5)),
                        t_samples=(lam + 0.5, lam + 1.0, lam + 2.0),
                        description="entropic member that activates a moving shock at t=lambda")


def bounded_blowup() -> CatalogEntry:
    m = _flipping()
    y = lambda t: -((t - 2.0) ** 2) / 4.0 if t < 2 else 0.0
    fld = ClosedFormField(m, [y], [lambda x, t: _neg_sqrt_left(x), constant(0.0)],
                          name="bounded_blowup", time_breaks=(2.0,))
    datum = Datum([(-math.inf, -1.0, "-abs(x)^-0.5"), (-1.0, math.inf, 0.0)], name="bounded")
    return CatalogEntry("bounded_blowup", m, datum, fld,
                        expected={"entropy": PASS, "interface": PASS, "profile_at_2": "shocking"},
                        curves={"shock": Curve(y, lambda t: (2.0 - t) / 2.0 if t < 2 else 0.0, 0.0, 1.9)},
                        domain=((-3.0, 1.0), (0.0, 3.0)), t_samples=(0.5, 1.0, 1.9, 2.5),
                        description="bounded datum whose shock reaches the interface at t=2")


def power_family(s=2.0) -> CatalogEntry:
    s = float(s)
    if not s > 1:
        raise ValueError("power_family needs s > 1")
    h = "u^2" if s == 2 else f"abs(u)^{s!r}"
    m = FluxModel.multiplicative("x", h, name=f"x*|u|^{s:g}")
    y = lambda t: ((s - 1.0) * t / s) ** (s / (s - 1.0)) if t > 0 else 0.0
    dy = lambda t: ((s - 1.0) * t / s) ** (1.0 / (s - 1.0)) if t > 0 else 0.0
    fld = ClosedFormField(m, [lambda t: 0.0, y],
                          [lambda x, t: -(-x) ** (-1.0 / s), lambda x, t: x ** (-1.0 / s), constant(0.0)],
                          name=f"power_{s:g}")
    datum = Datum([(-math.inf, 0.0, f"-abs(x)^{-1.0 / s!r}"), (0.0, math.inf, 0.0)])
    return CatalogEntry("power_family", m, datum, fld, expected={"entropy": PASS, "interface": FAIL},
                        params={"s": s}, curves={"shock": Curve(y, dy, 0.0, 3.0)},
                        domain=((-1.0, 3.0), (0.0, 3.0)), t_samples=(0.5, 1.0, 2.0),
                        description="moving-shock non-uniqueness for x|u|^s")


def _box_exact(x, t):
    a = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(a)
    if t == 0:
        out[a < 1] = -1.0
        return out
    box = a < (1.0 - t) ** 2
    fan = (~box) & (a <= 1.0)
    out[box] = 1.0 / (t - 1.0)
    p0 = (np.sqrt(a[fan]) - 1.0) / t
    out[fan] = p0 / (1.0 + t * p0)
    return out


def square_box_blowup() -> CatalogEntry:
    m = _flipping()
    r = lambda t: (1.0 - t) ** 2
    bounds = [lambda t: -1.0, lambda t: -r(t), lambda t: r(t), lambda t: 1.0]
    fld = ClosedFormField(m, bounds, [lambda x, t: _box_exact(x, t)] * 5, name="square_box",
                          horizon=1.0 - 1e-12)
    datum = Datum([(-1.0, 1.0, -1.0)], name="square_box")
    seeds = tuple((q, -1.0) for q in np.linspace(-0.9, 0.9, 7)) + \
        tuple((1.0, p) for p in np.linspace(-1.0, 0.0, 5)) + tuple((-1.0, p) for p in np.linspace(-1.0, 0.0, 5))
    return CatalogEntry("square_box_blowup", m, datum, fld,
                        expected={"blowup_time": 1.0, "blowup_locus": "x=0, t>=1", "crossings_before": 1.0},
                        characteristic=lambda t, q0, p0: flipping_closed_form(q0, p0, t), seeds=seeds,
                        description="box datum -1 on |x|<=1; characteristics focus at x=0 at t=1")


def no_blowup_quadratic_g() -> CatalogEntry:
    m = FluxModel.multiplicative("x^2", "u^2", name="x^2*u^2")
    seeds = ((1.0, 1.0), (0.5, -1.0), (-1.5, 0.7), (2.0, -0.3), (-0.4, -1.8))
    return CatalogEntry("no_blowup_quadratic_g", m, None, None, expected={"blowup_time": None},
                        characteristic=lambda t, q0, p0: quadratic_g_closed_form(q0, p0, t), seeds=seeds,
                        description="x^2 u^2: characteristics grow exponentially but never blow up")


def global_illposed() -> CatalogEntry:
    m = FluxModel.general("x*u^2+u^4", name="x*u^2+u^4")
    seeds = tuple((q, -1.0) for q in (-10.0, -1.0, 0.0, 1.0, 10.0))
    return CatalogEntry("global_illposed", m, Datum([(-math.inf, math.inf, -1.0)]), None,
                        expected={"blowup_time": 1.0, "continuation": None},
                        characteristic=lambda t, q0, p0=None: coercive_closed_form(q0, t), seeds=seeds,
                        description="u0=-1 for x u^2 + u^4: every characteristic escapes at t=1")


def bad_data_no_weak(K: float = 1.0, T: float = 1.0) -> CatalogEntry:
    m = _flipping()
    fld = ClosedFormField(m, [lambda t: 0.0], [constant(0.0), lambda x, t: -1.0 / np.sqrt(x)],
                          name="localized_negative_branch", stationary=True)
    datum = Datum([(-math.inf, 0.0, 0.0), (0.0, math.inf, "abs(x)^-0.5")], name="bad_data")
    return CatalogEntry("bad_data_no_weak", m, datum, fld,
                        expected={"weak_solution": FAIL, "flux_trace": T, "deviation": "t"},
                        params={"K": K, "T": T},
                        description="positive datum 1/sqrt(x); the localized field -1/sqrt(x) beyond K "
                                    "violates the integral balance")


_BUILDERS = {
    "stat_equality": stat_equality,
    "shock_nonunique_family": shock_nonunique_family,
    "bounded_blowup": bounded_blowup,
    "power_family": power_family,
    "square_box_blowup": square_box_blowup,
    "no_blowup_quadratic_g": no_blowup_quadratic_g,
    "global_illposed": global_illposed,
    "bad_data_no_weak": bad_data_no_weak,
}


def names() -> tuple:
    return NAMES


def entry(name: str, *args, **params) -> CatalogEntry:
    try:
        build = _BUILDERS[name]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {name!r}") from None
    return build(*args, **params)


def cross_validate(e: CatalogEntry, n_phi: int = 25, threads=None) -> VerificationReport:
    """Run the relevant checks on ``e`` and compare with its declared properties."""
    rows = []

    def record(check, expected, observed, ok, **extra):
        rows.append({"check": check, "expected": expected, "observed": observed, "ok": bool(ok), **extra})

    exp = e.expected
    if e.field is not None and "entropy" in exp:
        rep = entropy_battery(e.field, e.model, e.domain, n_phi=n_phi, threads=threads)
        want = exp["entropy"]
        ok = rep.verdict == want if want == EQUALITY else rep.verdict in (PASS, EQUALITY)
        record("entropy", want, rep.verdict, ok, min_residual=rep.min_residual)
    if e.field is not None and "interface" in exp:
        rep = interface_condition(e.field, e.model, e.t_samples)
        record("interface", exp["interface"], rep.verdict, rep.verdict == exp["interface"])
    for key, c in e.curves.items():
        t, y, dy = c.samples(101)
        t0 = max(c.t0, 1e-3)
        mask = t >= t0
        res = rh_residual(e.field, e.model, (t[mask], y[mask]), ydot=dy[mask])
        record(f"rh:{key}", "<= 1e-8", res.residual, res.residual <= 1e-8)
    if "blowup_time" in exp:
        want = exp["blowup_time"]
        got = []
        for q0, p0 in e.seeds[:5]:
            got.append(estimate_blowup_time(e.model, q0, p0))
        if want is None:
            ok = all(g is None for g in got)
        else:
            ok = all(g is not None and abs(g - want) <= 1e-2 for g in got)
        record("blowup_time", want, got, ok)
    if "weak_solution" in exp:
        K, T = e.params["K"], e.params["T"]
        rep = weak_solution_diagnostics(e.field, e.model, K, T)
        record("weak_solution", exp["weak_solution"], rep.verdict, rep.verdict == exp["weak_solution"],
               details=rep.details)
    verdict = PASS if all(r["ok"] for r in rows) else FAIL
    return VerificationReport("cross_validate", rows, None, verdict,
                              provenance={"entry": e.name, "params": dict(e.params)})

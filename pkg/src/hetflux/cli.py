"""Command-line entry point.

A run is described by one JSON config. Top-level keys are shared by every
command; a section named after the command (``"solve": {...}``) overrides
them, and command-line flags override both. Example::

    {
      "flux": {"kind": "multiplicative", "g": "x", "h": "u^2"},
      "datum": {"kind": "piecewise", "pieces": [{"lo": -1, "hi": 1, "u": "-1"}]},
      "delta": 0.1,
      "horizon": 0.5,
      "window": [-2, 2],
      "solve": {"grid": {"nx": 201, "nt": 6}}
    }

Exit codes: 0 success, 1 verification or validation failure, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import catalog as C
from .characteristics import (CharacteristicOptions, detect_crossings, estimate_blowup_time,
                              fan_characteristics, integrate_batch, write_manifest)
from .expr import ExprError
from .flux import FluxError, FluxModel, validate_assumptions
from .fronttracking import Datum, FTOptions, solve, write_field_csv
from .serialize import dumps
from .verifier import (FAIL, PASS, entropy_battery, interface_condition, rh_residual,
                       weak_solution_diagnostics)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

COMMANDS = ("validate", "solve", "characteristics", "verify", "catalog", "repro")
FIGURES = ("figblowup", "linfblowup", "disco")
CHECKS = ("entropy", "interface", "rh", "weak_solution")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INTERVAL = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_EXPR = {"type": ["string", "number"]}

_FLUX = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["multiplicative", "general", "general_closed_form"]},
        "g": _EXPR, "h": _EXPR, "f": _EXPR, "name": {"type": "string"},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "multiplicative"}}}, "then": {"required": ["g", "h"]}},
        {"if": {"properties": {"kind": {"enum": ["general", "general_closed_form"]}}},
         "then": {"required": ["f"]}},
    ],
}

_DATUM = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["expression", "piecewise", "samples", "catalog"]},
        "u": _EXPR,
        "pieces": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["u"],
            "properties": {"lo": _NUM, "hi": _NUM, "u": _EXPR}, "additionalProperties": False}},
        "x": {"type": "array", "items": _NUM},
        "name": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "expression"}}}, "then": {"required": ["u"]}},
        {"if": {"properties": {"kind": {"const": "piecewise"}}}, "then": {"required": ["pieces"]}},
        {"if": {"properties": {"kind": {"const": "samples"}}},
         "then": {"required": ["x", "u"], "properties": {"u": {"type": "array", "items": _NUM}}}},
        {"if": {"properties": {"kind": {"const": "catalog"}}}, "then": {"required": ["name"]}},
    ],
}

_SECTION = {
    "flux": _FLUX,
    "datum": _DATUM,
    "delta": _POS,
    "horizon": _POS,
    "window": _INTERVAL,
    "tolerances": {
        "type": "object",
        "properties": {
            "rtol": _POS, "atol": _POS, "blowup_threshold": _POS, "interface_margin": _POS,
            "quadrature_panels": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
    "out": {"type": "string"},
    "grid": {
        "type": "object",
        "properties": {"nx": {"type": "integer", "minimum": 2}, "nt": {"type": "integer", "minimum": 1}},
        "additionalProperties": False,
    },
    "seed": {"type": "integer"},
    "seeds": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
    "field": {"oneOf": [{"const": "solve"}, {
        "type": "object", "required": ["catalog"],
        "properties": {"catalog": {"enum": list(C.NAMES)}, "params": {"type": "object"}},
        "additionalProperties": False}]},
    "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
    "domain": {"type": "array", "items": _INTERVAL, "minItems": 2, "maxItems": 2},
    "n_phi": {"type": "integer", "minimum": 1},
    "n_k": {"type": "integer", "minimum": 1},
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {**_SECTION, **{c: {"type": "object", "properties": _SECTION, "additionalProperties": False}
                                  for c in COMMANDS}},
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(json_pointer, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


def _pointer(path) -> str:
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_config(cfg: dict) -> None:
    """Raise :class:`ConfigError` listing every schema violation with its JSON pointer."""
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errs = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errs:
        raise ConfigError([(_pointer(e.absolute_path), e.message) for e in errs])


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError([("", f"cannot read config: {exc}")]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"invalid JSON at line {exc.lineno}: {exc.msg}")]) from None
    validate_config(cfg)
    return cfg


def effective_config(cfg: dict, command: str, args) -> dict:
    """Top-level keys, then the command section, then flags."""
    eff = {k: v for k, v in cfg.items() if k not in COMMANDS}
    eff.update(cfg.get(command, {}))
    for key in ("delta", "horizon", "out"):
        v = getattr(args, key, None)
        if v is not None:
            eff[key] = v
    if getattr(args, "check", None):
        eff["checks"] = list(args.check)
    for key in ("delta", "horizon"):
        if key in eff and not eff[key] > 0:
            raise ConfigError([(f"/{key}", f"{key} must be positive")])
    return eff


# -- builders --------------------------------------------------------------------

def _model(eff: dict) -> FluxModel:
    if "flux" not in eff:
        raise ConfigError([("/flux", "a flux is required")])
    try:
        return FluxModel.from_spec(eff["flux"])
    except (FluxError, ExprError) as exc:
        raise ConfigError([("/flux", str(exc))]) from None


def _datum(eff: dict):
    spec = eff.get("datum")
    if spec is None:
        raise ConfigError([("/datum", "a datum is required")])
    if spec["kind"] == "catalog":
        e = _catalog_entry(spec["name"], spec.get("params", {}), "/datum")
        if e.datum is None:
            raise ConfigError([("/datum/name", f"{e.name} has no initial datum")])
        return e.datum, e.model
    try:
        return Datum.from_spec(spec), None
    except (ValueError, ExprError) as exc:
        raise ConfigError([("/datum", str(exc))]) from None


def _catalog_entry(name: str, params: dict, where: str):
    try:
        return C.entry(name, **params)
    except C.CatalogError as exc:
        raise ConfigError([(where, str(exc))]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError([(where + "/params", str(exc))]) from None


def _char_opts(eff: dict) -> CharacteristicOptions:
    tol = eff.get("tolerances", {})
    kw = {}
    for src, dst in (("rtol", "rtol"), ("atol", "atol"), ("blowup_threshold", "threshold"),
                     ("interface_margin", "interface_margin")):
        if src in tol:
            kw[dst] = float(tol[src])
    return CharacteristicOptions(**kw)


def _ft_opts(eff: dict) -> FTOptions:
    tol = eff.get("tolerances", {})
    kw = {k: float(tol[k]) for k in ("rtol", "atol") if k in tol}
    return FTOptions(**kw)


def _out_dir(eff: dict) -> Optional[Path]:
    if "out" not in eff:
        return None
    p = Path(eff["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(obj, out: Optional[Path], name: str) -> None:
    text = dumps(obj)
    if out is not None:
        (out / name).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _window(eff: dict, default=(-2.0, 2.0)) -> tuple:
    w = eff.get("window", default)
    if not w[0] < w[1]:
        raise ConfigError([("/window", "window must be increasing")])
    return float(w[0]), float(w[1])


# -- commands --------------------------------------------------------------------

def cmd_validate(eff: dict, out: Optional[Path] = None) -> int:
    """Assumption report; exit 1 unless every assumption holds."""
    model = _model(eff)
    rep = validate_assumptions(model, _window(eff))
    data = rep.to_dict()
    data["flux"] = model.to_spec()
    data["front_tracking"] = "accepted" if rep.ok() else "rejected"
    data["characteristics"] = "accepted"
    if rep.ok():
        data["eta"] = rep.eta
        data["growth_exponent"] = rep.growth_exponent
    _emit(data, out, "assumptions.json")
    return EXIT_OK if rep.ok() else EXIT_FAIL


def _run_solve(eff: dict):
    datum, cat_model = _datum(eff)
    model = cat_model if "flux" not in eff and cat_model is not None else _model(eff)
    if not model.is_multiplicative:
        raise ConfigError([("/flux/kind", "front tracking needs a multiplicative flux")])
    for key in ("delta", "horizon"):
        if key not in eff:
            raise ConfigError([(f"/{key}", f"{key} is required")])
    window = _window(eff, (-10.0, 10.0))
    sol = solve(model, datum, float(eff["delta"]), float(eff["horizon"]), window=window, opts=_ft_opts(eff))
    return model, sol, window


def cmd_solve(eff: dict, out: Optional[Path] = None) -> int:
    """Front tracking run; writes the manifest plus CSV dumps when ``out`` is set."""
    model, sol, window = _run_solve(eff)
    manifest = sol.to_manifest()
    manifest["flux"] = model.to_spec()
    manifest["window"] = list(window)
    if out is not None:
        grid = eff.get("grid", {})
        xs = np.linspace(window[0], window[1], int(grid.get("nx", 401)))
        ts = np.linspace(0.0, sol.horizon, int(grid.get("nt", 5)))
        write_field_csv(sol, out / "field.csv", xs, ts)
        sol.write_trajectories_csv(out / "trajectories.csv")
    _emit(manifest, out, "solution.json")
    return EXIT_OK


def cmd_characteristics(eff: dict, out: Optional[Path] = None) -> int:
    """Integrate the configured seeds and estimate blow-up times."""
    if "flux" in eff:
        model = _model(eff)
    elif eff.get("datum", {}).get("kind") == "catalog":
        model = _datum(eff)[1]
    else:
        raise ConfigError([("/flux", "a flux is required")])
    seeds = eff.get("seeds")
    if not seeds:
        raise ConfigError([("/seeds", "at least one (q0, p0) seed is required")])
    horizon = float(eff.get("horizon", 1.0))
    opts = _char_opts(eff)
    trs = integrate_batch(model, [tuple(s) for s in seeds], horizon, opts)
    blow = [estimate_blowup_time(model, float(q), float(p)) for q, p in seeds]
    extra = {"flux": model.to_spec(), "horizon": horizon, "blowup_estimates": blow,
             "crossings": detect_crossings(trs).to_dict()}
    data = {"trajectories": [tr.summary() for tr in trs], **extra}
    if out is not None:
        for i, tr in enumerate(trs):
            tr.to_csv(out / f"characteristic_{i:03d}.csv")
        write_manifest(trs, out / "manifest.json", extra)
    sys.stdout.write(dumps(data))
    return EXIT_OK


def cmd_verify(eff: dict, out: Optional[Path] = None) -> int:
    """Run the requested checks on a catalog field or a fresh front tracking solution."""
    ref = eff.get("field", "solve")
    checks = eff.get("checks") or ["entropy", "interface"]
    entry = None
    if ref == "solve":
        model, fld, window = _run_solve(eff)
        domain = eff.get("domain", [list(window), [0.0, fld.horizon]])
        t_samples = tuple(np.linspace(0.0, fld.horizon, 5))
    else:
        entry = _catalog_entry(ref["catalog"], ref.get("params", {}), "/field")
        model, fld = entry.model, entry.field
        if fld is None:
            raise ConfigError([("/field/catalog", f"{entry.name} has no solution field")])
        domain = eff.get("domain", entry.domain)
        t_samples = entry.t_samples or (0.0,)
    reports = []
    for check in checks:
        if check == "entropy":
            if domain is None:
                raise ConfigError([("/domain", "entropy check needs a space-time domain")])
            reports.append(entropy_battery(fld, model, tuple(map(tuple, domain)), n_k=int(eff.get("n_k", 5)),
                                           n_phi=int(eff.get("n_phi", 25)), seed=eff.get("seed")))
        elif check == "interface":
            reports.append(interface_condition(fld, model, t_samples))
        elif check == "rh":
            curves = entry.curves if entry is not None else {}
            rows = []
            for key, c in curves.items():
                t, y, dy = c.samples(101)
                m = t >= max(c.t0, 1e-3)
                rows.append({"curve": key, **rh_residual(fld, model, (t[m], y[m]), ydot=dy[m]).to_dict()})
            ok = all(r["residual"] <= 1e-8 for r in rows)
            reports.append({"check": "rh", "verdict": PASS if ok else FAIL, "curves": rows})
        elif check == "weak_solution":
            K = float(entry.params.get("K", 1.0)) if entry is not None else 1.0
            T = float(entry.params.get("T", fld.horizon)) if entry is not None else fld.horizon
            reports.append(weak_solution_diagnostics(fld, model, K, T))
    data = {"reports": reports}
    _emit(data, out, "verification.json")
    verdicts = [r["verdict"] if isinstance(r, dict) else r.verdict for r in reports]
    return EXIT_FAIL if FAIL in verdicts else EXIT_OK


def cmd_catalog(action: str, name: Optional[str], eff: dict, out: Optional[Path] = None,
                params: Optional[dict] = None) -> int:
    params = params or {}
    if action == "list":
        rows = []
        for n in C.names():
            e = C.entry(n)
            rows.append({"name": n, "description": e.description, "expected": e.expected})
        _emit({"entries": rows}, out, "catalog.json")
        return EXIT_OK
    if name is None:
        raise ConfigError([("", f"catalog {action} needs an entry name")])
    e = _catalog_entry(name, params, "/name")
    if action == "emit":
        _emit(e.to_manifest(), out, f"{name}.json")
        return EXIT_OK
    rep = C.cross_validate(e, n_phi=int(eff.get("n_phi", 25)))
    _emit(rep, out, f"{name}_crossvalidate.json")
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- figure reproductions ------------------------------------------------------------

def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])


def _trajectory_rows(label, idx, tr):
    for t, q, p in zip(tr.t, tr.q, tr.p):
        yield label, idx, float(t), float(q), float(p)


def repro_figblowup(out: Path, horizon: float = 1.0) -> dict:
    """Fan and box characteristics for ``x u^2`` from the box datum ``-1`` on ``|x| <= 1``."""
    model = FluxModel.multiplicative("x", "u^2")
    opts = CharacteristicOptions()
    groups = {
        "box": integrate_batch(model, [(q, -1.0) for q in np.linspace(-1.0, 1.0, 11)], horizon, opts),
        "fan_right": fan_characteristics(model, 1.0, (-1.0, 0.0), 6, horizon, opts),
        "fan_left": fan_characteristics(model, -1.0, (-1.0, 0.0), 6, horizon, opts),
        "outside": integrate_batch(model, [(q, 0.0) for q in (-2.0, -1.5, 1.5, 2.0)], horizon, opts),
    }
    rows = []
    for label, trs in groups.items():
        for i, tr in enumerate(trs):
            rows.extend(_trajectory_rows(label, i, tr))
    _write_rows(out / "figblowup_characteristics.csv", ["group", "index", "t", "q", "p"], rows)
    return {"figure": "figblowup", "files": ["figblowup_characteristics.csv"],
            "terminations": {k: [tr.termination.to_dict() for tr in v] for k, v in groups.items()}}


def _front_rows(name, curve, n=201):
    ts, ys, _ = curve.samples(n)
    return [(name, float(t), float(y)) for t, y in zip(ts, ys)]


def repro_linfblowup(out: Path) -> dict:
    """Shock ``y = -(t-2)^2/4`` of the bounded datum, the profile, and its sup norm on ``x < 0``."""
    e = C.bounded_blowup()
    curve = e.curves["shock"]
    _write_rows(out / "linfblowup_shock.csv", ["curve", "t", "y"], _front_rows("shock", curve))
    xs = np.linspace(-3.0, 1.0, 401)
    ts = (0.0, 0.5, 1.0, 1.5, 1.9)
    write_field_csv(e.field, out / "linfblowup_field.csv", xs, ts)
    # the largest |u| is attained just left of the shock
    sup = [(float(t), float(1.0 / math.sqrt(-curve.y(t)))) for t in np.linspace(0.0, 1.9, 39)]
    _write_rows(out / "linfblowup_sup.csv", ["t", "sup_abs_u"], sup)
    return {"figure": "linfblowup",
            "files": ["linfblowup_shock.csv", "linfblowup_field.csv", "linfblowup_sup.csv"]}


def repro_disco(out: Path) -> dict:
    """Members of the non-uniqueness family: shock curves and field snapshots."""
    lams = (0.0, 0.5, 1.0)
    rows = []
    for lam in lams:
        e = C.shock_nonunique_family(lam)
        rows.extend(_front_rows(f"lambda={lam:g}", e.curves["shock"]))
    _write_rows(out / "disco_shocks.csv", ["curve", "t", "y"], rows)
    xs = np.linspace(-1.0, 3.0, 401)
    files = ["disco_shocks.csv"]
    for lam in lams + ("stationary",):
        e = C.shock_nonunique_family(lam)
        name = f"disco_field_{lam if isinstance(lam, str) else format(lam, 'g')}.csv"
        write_field_csv(e.field, out / name, xs, (0.0, 1.0, 2.0, 3.0))
        files.append(name)
    return {"figure": "disco", "files": files, "lambdas": list(lams) + ["stationary"]}


_REPRO = {"figblowup": repro_figblowup, "linfblowup": repro_linfblowup, "disco": repro_disco}


def cmd_repro(figure: str, eff: dict, out: Optional[Path]) -> int:
    if figure not in _REPRO:
        raise ConfigError([("/figure", f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")])
    out = out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    kw = {"horizon": float(eff["horizon"])} if figure == "figblowup" and "horizon" in eff else {}
    sys.stdout.write(dumps(_REPRO[figure](out, **kw)))
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--delta", type=float, help="front tracking flux spacing")
    common.add_argument("--horizon", type=float, help="final time T")
    common.add_argument("--check", action="append", choices=CHECKS, metavar="NAME",
                        help=f"verification check (repeatable): {', '.join(CHECKS)}")

    p = argparse.ArgumentParser(prog="hetflux", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the structural flux assumptions")
    sub.add_parser("solve", parents=[common], help="front tracking solution")
    sub.add_parser("characteristics", parents=[common], help="characteristic trajectories")
    sub.add_parser("verify", parents=[common], help="entropy and interface checks")
    cat = sub.add_parser("catalog", parents=[common], help="closed-form fixtures")
    cat.add_argument("action", choices=("list", "emit", "crossvalidate"))
    cat.add_argument("name", nargs="?")
    cat.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="builder parameter, e.g. lam=0.5")
    rep = sub.add_parser("repro", parents=[common], help="reproduce a named construction as CSV")
    rep.add_argument("figure", nargs="?", choices=FIGURES)
    rep.add_argument("--figure", dest="figure_flag", choices=FIGURES, metavar="ID")
    return p


def _parse_params(items) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError([("/param", f"expected KEY=VALUE, got {item!r}")])
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        eff = effective_config(cfg, args.command, args)
        out = _out_dir(eff)
        if args.command == "validate":
            return cmd_validate(eff, out)
        if args.command == "solve":
            return cmd_solve(eff, out)
        if args.command == "characteristics":
            return cmd_characteristics(eff, out)
        if args.command == "verify":
            return cmd_verify(eff, out)
        if args.command == "catalog":
            return cmd_catalog(args.action, args.name, eff, out, _parse_params(args.param))
        figure = args.figure or args.figure_flag
        if figure is None:
            raise ConfigError([("/figure", "a figure id is required")])
        return cmd_repro(figure, eff, out)
    except ConfigError as exc:
        sys.stderr.write(dumps({"error": "config", "details": [{"path": p, "message": m}
                                                               for p, m in exc.errors]}))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Composite Gauss-Legendre rules that respect breakpoints, kinks and endpoint singularities."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.optimize import brentq


@lru_cache(maxsize=16)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _cell_nodes(a, b, n):
    s, w = _gauss(n)
    return a + (b - a) * s, (b - a) * w


@lru_cache(maxsize=16)
def _graded_unit(n, ratio, levels):
    edges = [ratio**j for j in range(levels + 1)]
    xs, ws = [], []
    for j in range(levels):
        x, w = _cell_nodes(edges[j + 1], edges[j], n)
        xs.append(x)
        ws.append(w)
    tau, wt = _gauss(n)
    c = edges[-1]
    xs.append(c * tau**2)
    ws.append(2.0 * c * tau * wt)
    return np.concatenate(xs), np.concatenate(ws)


def _graded_nodes(a, b, towards_a: bool, n, ratio, levels):
    """Nodes on ``[a, b]`` graded geometrically toward one end.

    The innermost cell uses ``x = s + c tau^2``, which integrates ``|x - s|^(-1/2)``
    type singularities without loss.
    """
    off, wgt = _graded_unit(n, ratio, levels)
    L = b - a
    if towards_a:
        return a + L * off, L * wgt
    return b - L * off, L * wgt


def rule(a: float, b: float, breaks: Iterable[float] = (), singular: Iterable[float] = (),
         n: int = 16, max_panel: Optional[float] = None, ratio: float = 0.2, levels: int = 12,
         kink: Optional[Callable] = None, kink_samples: int = 24):
    """Nodes and weights for ``∫_a^b``.

    Args:
        breaks: points where the integrand may jump.
        singular: points where it may blow up (integrably); cells ending
            there are graded geometrically.
        max_panel: split longer cells uniformly.
        kink: a vectorised function; its sign changes inside a cell are
            located and added as breakpoints.
    """
    if not b > a:
        return np.empty(0), np.empty(0)
    sing = sorted({float(s) for s in singular if a <= s <= b})
    pts = {a, b}
    pts.update(float(p) for p in breaks if a < p < b)
    pts.update(s for s in sing if a < s < b)
    pts = sorted(pts)
    cells = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            continue
        m = 1
        if max_panel is not None and hi - lo > max_panel:
            m = math.ceil((hi - lo) / max_panel)
        e = np.linspace(lo, hi, m + 1)
        cells.extend(zip(e[:-1], e[1:]))
    if kink is not None:
        cells = _split_kinks(cells, kink, kink_samples, sing)
    xs, ws = [], []
    sing_arr = np.array(sing)
    cl = np.array([c[0] for c in cells], dtype=float)
    ch = np.array([c[1] for c in cells], dtype=float)
    if sing_arr.size:
        tol = 1e-14 * np.maximum(1.0, np.abs(sing_arr))
        sa = np.any(np.abs(cl[:, None] - sing_arr[None, :]) <= tol, axis=1)
        sb = np.any(np.abs(ch[:, None] - sing_arr[None, :]) <= tol, axis=1)
    else:
        sa = sb = np.zeros(len(cells), dtype=bool)
    plain = ~(sa | sb)
    if plain.any():
        g, w = _gauss(n)
        L = (ch - cl)[plain]
        xs.append((cl[plain][:, None] + L[:, None] * g[None, :]).ravel())
        ws.append((L[:, None] * w[None, :]).ravel())
    for c in np.flatnonzero(~plain):
        lo, hi = cl[c], ch[c]
        if sa[c] and sb[c]:
            mid = 0.5 * (lo + hi)
            parts = (_graded_nodes(lo, mid, True, n, ratio, levels),
                     _graded_nodes(mid, hi, False, n, ratio, levels))
        else:
            parts = (_graded_nodes(lo, hi, bool(sa[c]), n, ratio, levels),)
        for x, w in parts:
            xs.append(x)
            ws.append(w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def _split_kinks(cells, kink, m, sing):
    if not cells:
        return cells
    lo = np.array([c[0] for c in cells])
    hi = np.array([c[1] for c in cells])
    # keep clear of singular endpoints when sampling
    pad = 1e-9 * (hi - lo)
    frac = np.linspace(0.0, 1.0, m)
    s = (lo + pad)[:, None] + ((hi - lo) - 2 * pad)[:, None] * frac[None, :]
    v = np.asarray(kink(s.ravel()), dtype=float).reshape(s.shape)
    sg = np.sign(v)
    change = np.isfinite(v[:, :-1]) & np.isfinite(v[:, 1:]) & (sg[:, :-1] * sg[:, 1:] < 0)
    scalar = lambda z: float(np.asarray(kink(np.array([z])), dtype=float)[0])
    if not change.any():
        return cells
    hit = change.any(axis=1)
    out = []
    for c, (a, b) in enumerate(cells):
        if not hit[c]:
            out.append((a, b))
            continue
        idx = np.flatnonzero(change[c])
        roots = []
        for i in idx:
            try:
                roots.append(brentq(scalar, s[c, i], s[c, i + 1], xtol=1e-14))
            except ValueError:
                pass
        e = [a] + sorted(roots) + [b]
        out.extend((p, q) for p, q in zip(e[:-1], e[1:]) if q > p)
    return out


def integrate(fun: Callable, a: float, b: float, **kw) -> float:
    """``∫_a^b fun(x) dx`` with :func:`rule`; ``fun`` is called once, vectorised."""
    x, w = rule(a, b, **kw)
    if x.size == 0:
        return 0.0
    return float(np.dot(w, fun(x)))

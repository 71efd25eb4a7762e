"""Convex envelopes of tabulated functions and the facts built on them.

On a finite support the envelope at ``x`` is the least value of
``sum l_k f(x_k)`` over convex combinations of domain points equal to ``x``.
In one dimension it is read off the lower convex hull of the graph; in two
and three dimensions from the lower facets of the lifted point cloud.  A
linear program gives an independent pointwise evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .domain import (INF, TabFunc, as_metric, at_least, iter_midpoint_triples, set_diameter)
from .exceptions import PreconditionError
from .moduli import delta_modulus, is_midpoint_convex

BARY_TOL = 1e-9


@dataclass
class EnvelopeResult:
    envelope: TabFunc
    active_sets: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = self.envelope.to_json()
        out["active_sets"] = [None if a is None else {"points": a[0].tolist(), "weights": a[1].tolist()}
                              for a in self.active_sets]
        return out


# ---------------------------------------------------------------------------
# one dimension


def _lower_hull_1d(x, y):
    """Indices (into the sorted arrays) of the lower convex hull vertices."""
    hull = []
    for k in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on or above the chord from a to k
            if (y[b] - y[a]) * (x[k] - x[a]) >= (y[k] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(k)
    return np.array(hull)


def _envelope_1d(f: TabFunc):
    s = f.support
    dom = np.flatnonzero(f.dom)
    order = dom[np.argsort(s.lattice[dom, 0], kind="stable")]
    lat = s.lattice[order, 0].astype(float)
    y = f.values[order]
    h = _lower_hull_1d(lat, y)
    hx, hy, hid = lat[h], y[h], order[h]
    q = s.lattice[:, 0].astype(float)
    env = np.full(s.n, INF)
    active = [None] * s.n
    inside = (q >= hx[0]) & (q <= hx[-1])
    k = np.clip(np.searchsorted(hx, q, side="right") - 1, 0, max(hx.size - 2, 0))
    for p in np.flatnonzero(inside):
        a = int(k[p])
        if hx.size == 1 or q[p] == hx[a]:
            env[p] = hy[a]
            active[p] = (np.array([hid[a]]), np.array([1.0]))
            continue
        b = a + 1
        t = (q[p] - hx[a]) / (hx[b] - hx[a])
        if t == 1.0:
            env[p] = hy[b]
            active[p] = (np.array([hid[b]]), np.array([1.0]))
            continue
        env[p] = (1 - t) * hy[a] + t * hy[b]
        active[p] = (np.array([hid[a], hid[b]]), np.array([1 - t, t]))
    return env, active


# ---------------------------------------------------------------------------
# two and three dimensions


def _affine_rank(pts):
    if pts.shape[0] <= 1:
        return 0
    return int(np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-10))


def _envelope_lifted(f: TabFunc):
    s = f.support
    dim = s.dim
    dom = np.flatnonzero(f.dom)
    X = s.lattice[dom].astype(float)
    y = f.values[dom]
    if _affine_rank(X) < dim:
        return None
    # a raised copy makes the lifted cloud full dimensional even for affine data
    top = y.max() + 1.0 + (y.max() - y.min())
    pts = np.vstack([np.column_stack([X, y]), np.column_stack([X, np.full(len(y), top)])])
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return None
    eq = hull.equations
    lower = eq[:, dim] < -1e-12
    simp = hull.simplices[lower]
    eq = eq[lower]
    if np.any(simp >= len(y)):
        keep = np.all(simp < len(y), axis=1)
        simp, eq = simp[keep], eq[keep]
    # facet plane: n.x + n_y y + c = 0  ->  y = -(n.x + c) / n_y
    slope = -eq[:, :dim] / eq[:, [dim]]
    icpt = -eq[:, dim + 1] / eq[:, dim]
    # barycentric transforms of each projected facet simplex
    verts = X[simp]                               # (F, dim+1, dim)
    T = verts[:, :-1, :] - verts[:, [-1], :]      # (F, dim, dim)
    det = np.linalg.det(T)
    good = np.abs(det) > 1e-12
    simp, slope, icpt, verts, T = simp[good], slope[good], icpt[good], verts[good], T[good]
    Tinv = np.linalg.inv(T)
    Q = s.lattice.astype(float)
    env = np.full(s.n, INF)
    active = [None] * s.n
    lo, hi = X.min(axis=0), X.max(axis=0)
    for p in range(s.n):
        q = Q[p]
        if np.any(q < lo) or np.any(q > hi):
            continue
        vals = slope @ q + icpt
        cand = np.flatnonzero(vals >= vals.max() - 1e-9 * max(1.0, abs(vals.max())))
        for fct in cand:
            lam = (q - verts[fct, -1]) @ Tinv[fct]
            bary = np.append(lam, 1.0 - lam.sum())
            if bary.min() >= -BARY_TOL:
                bary = np.clip(bary, 0.0, None)
                bary /= bary.sum()
                nz = bary > 0
                ids = dom[simp[fct][nz]]
                w = bary[nz]
                env[p] = float(w @ f.values[ids])
                active[p] = (ids, w)
                break
    return env, active


def envelope_lp(f: TabFunc, point):
    """Envelope value at ``point`` by linear programming; returns ``(value, ids, weights)``."""
    s = f.support
    dom = np.flatnonzero(f.dom)
    X = s.coords[dom]
    q = np.atleast_1d(np.asarray(point, dtype=float))
    A = np.vstack([X.T, np.ones(len(dom))])
    b = np.append(q, 1.0)
    res = linprog(f.values[dom], A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status == 2:
        return INF, np.array([], dtype=np.int64), np.array([])
    if res.status != 0:
        raise PreconditionError(f"envelope linear program failed: {res.message}")
    lam = res.x
    nz = lam > 1e-12
    return float(res.fun), dom[nz], lam[nz]


def convex_envelope(f: TabFunc, with_active: bool = False):
    """Convex envelope on the same support.

    Returns the envelope :class:`TabFunc`, or an :class:`EnvelopeResult` when
    ``with_active`` is set.  Points outside the hull of ``dom(f)`` get ``+inf``.
    """
    if f.dim == 1:
        env, active = _envelope_1d(f)
    else:
        out = _envelope_lifted(f)
        if out is None:
            env = np.full(f.support.n, INF)
            active = [None] * f.support.n
            for p in range(f.support.n):
                val, ids, w = envelope_lp(f, f.coords[p])
                if math.isfinite(val):
                    env[p], active[p] = val, (ids, w)
        else:
            env, active = out
    env = np.minimum(env, f.values)
    for p in np.flatnonzero(f.dom & (env == f.values)):
        if active[p] is None or len(active[p][0]) != 1:
            active[p] = (np.array([p]), np.array([1.0]))
    name = f"env({f.name})" if f.name else "envelope"
    res = f.with_values(env, name=name)
    return EnvelopeResult(res, active) if with_active else res


def jensen_fixpoint(f: TabFunc, tol: float = 1e-12, max_iter: int = 100_000) -> TabFunc:
    """Iterate ``f <- min(f, (f(y) + f(z)) / 2 at every midpoint)`` until stable."""
    v = np.array(f.values)
    triples = list(iter_midpoint_triples(f.support))
    for _ in range(max_iter):
        new = v.copy()
        for i, j, m in triples:
            np.minimum.at(new, m, 0.5 * (v[i] + v[j]))
        change = np.max(np.abs(np.where(np.isfinite(v), v - new, 0.0)), initial=0.0)
        changed_dom = np.any(np.isinf(v) & np.isfinite(new))
        v = new
        if change <= tol and not changed_dom:
            break
    return f.with_values(v)


# ---------------------------------------------------------------------------
# local reduction


def local_envelope_reduction(f: TabFunc, x, eps: float, metric=None) -> float:
    """Envelope at ``x`` of ``f`` restricted to the open ball ``B(x, eps)``."""
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    s = f.support
    p = s.locate(x)
    if not f.dom[p]:
        raise PreconditionError("x must lie in dom(f)")
    metric = as_metric(metric, f.dim)
    near = metric.pairs(s, np.full(s.n, p), np.arange(s.n)) < eps * (1 - 1e-12)
    near &= f.dom
    sub = f.restrict(near)
    if sub.support.n == 1:
        return float(f.values[p])
    env = convex_envelope(sub)
    return float(env.values[sub.support.locate(x)])


# ---------------------------------------------------------------------------
# inequalities


def jensen_gap_check(f: TabFunc, x, combo, eps: float, metric=None, tol: float = 1e-9) -> dict:
    """Check ``f(x) <= sum l_k f(x_k) - delta_f(eps)`` for a convex combination far from ``x``."""
    if not is_midpoint_convex(f):
        raise PreconditionError("f must be convex")
    pts = np.array([np.atleast_1d(np.asarray(c[0], dtype=float)) for c in combo])
    w = np.array([float(c[1]) for c in combo])
    q = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise PreconditionError("weights must form a probability vector")
    if np.max(np.abs(w @ pts - q)) > 1e-9:
        raise PreconditionError("combination does not sum to x")
    s = f.support
    metric = as_metric(metric, f.dim)
    ip = s.locate(q)
    ids = np.array([s.locate(pt) for pt in pts])
    d = metric.pairs(s, np.full(ids.size, ip), ids)
    if not np.all(at_least(d, eps)):
        raise PreconditionError("every combination point must be at distance >= eps from x")
    delta = delta_modulus(f, eps, metric).delta
    lhs = float(f.values[ip])
    rhs = float(w @ f.values[ids]) - delta
    return {"holds": bool(lhs <= rhs + tol), "lhs": lhs, "rhs": rhs, "delta": delta}


def max_slice(f: TabFunc, w, delta: float) -> np.ndarray:
    """Domain points of the largest slice ``{f - <w, .> < min(f - <w, .>) + delta}``."""
    dom = f.dom
    g = np.where(dom, f.values - f.coords @ np.atleast_1d(np.asarray(w, float)), INF)
    lo = g.min()
    return np.flatnonzero(g < lo + delta - 1e-12 * max(1.0, abs(lo)))


def slice_diameter_criterion(f: TabFunc, delta: float, eps: float, metric=None,
                             dictionary=None, tol: float = 1e-9) -> dict:
    """Check both directions of the slice criterion on slopes from ``dictionary``.

    (1) when ``delta <= delta_f(eps)`` every slice disjoint from ``epi(f + delta)`` is
    ``eps``-small;  (2) when all those slices are ``eps``-small, ``delta_f(eps) >= delta / 2``.
    """
    if dictionary is None or len(dictionary) == 0:
        raise PreconditionError("empty functional dictionary")
    metric = as_metric(metric, f.dim)
    W = np.atleast_2d(np.asarray(dictionary, dtype=float)).reshape(len(dictionary), f.dim)
    worst = None
    all_small = True
    for w in W:
        idx = max_slice(f, w, delta)
        diam = set_diameter(f.support, idx, metric)
        if worst is None or diam > worst["diameter"]:
            worst = {"slope": w.tolist(), "diameter": diam, "size": int(idx.size),
                     "points": f.coords[idx].tolist() if idx.size <= 64 else None}
        if not diam < eps * (1 - 1e-12):
            all_small = False
    dmod = delta_modulus(f, eps, metric).delta
    d1_applies = dmod > 0 and delta <= dmod + tol
    d2_applies = all_small and delta > 0
    dir1 = (not d1_applies) or all_small
    dir2 = (not d2_applies) or dmod >= delta / 2 - tol
    return {"delta_f": dmod, "all_small": all_small, "direction1": bool(dir1),
            "direction1_applies": bool(d1_applies), "direction2": bool(dir2),
            "direction2_applies": bool(d2_applies), "passes": bool(dir1 and dir2),
            "widest_slice": worst}


def properness_check(f: TabFunc) -> dict:
    """Envelope properness, lower boundedness and an explicit affine minorant."""
    env = convex_envelope(f)
    k = int(np.argmin(np.where(env.dom, env.values, INF)))
    m = float(env.values[k])
    slope = np.zeros(f.dim)
    minorant_ok = bool(np.all(f.values[f.dom] >= m - 1e-12))
    return {"envelope_proper": bool(np.any(env.dom)), "bounded_below": math.isfinite(m),
            "inf": m, "minimizer": f.coords[k].tolist(),
            "affine_minorant": {"slope": slope.tolist(), "intercept": m},
            "minorant_verified": minorant_ok}


# ---------------------------------------------------------------------------
# piecewise-linear convex extension


def lower_planes(coords, values):
    """Affine pieces ``(S, c)`` with ``conv-extension(x) = max_i S_i . x + c_i`` on the hull."""
    X = np.asarray(coords, dtype=float)
    y = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    dim = X.shape[1]
    if dim == 1:
        order = np.argsort(X[:, 0], kind="stable")
        xs, ys = X[order, 0], y[order]
        h = _lower_hull_1d(xs, ys)
        if h.size < 2:
            raise PreconditionError("need at least two distinct points")
        s = np.diff(ys[h]) / np.diff(xs[h])
        c = ys[h][:-1] - s * xs[h][:-1]
        return s[:, None], c
    if _affine_rank(X) < dim:
        raise PreconditionError("points do not span the space")
    top = y.max() + 1.0 + (y.max() - y.min())
    pts = np.vstack([np.column_stack([X, y]), np.column_stack([X, np.full(len(y), top)])])
    hull = ConvexHull(pts)
    eq = hull.equations
    keep = (eq[:, dim] < -1e-12) & np.all(hull.simplices < len(y), axis=1)
    eq = eq[keep]
    S = -eq[:, :dim] / eq[:, [dim]]
    c = -eq[:, dim + 1] / eq[:, dim]
    _, uniq = np.unique(np.round(np.column_stack([S, c]), 12), axis=0, return_index=True)
    uniq = np.sort(uniq)
    return S[uniq], c[uniq]


def hull_halfspaces(coords):
    """``(A, b)`` with ``conv(coords) = {x : A x <= b}``."""
    X = np.asarray(coords, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] == 1:
        return np.array([[1.0], [-1.0]]), np.array([X.max(), -X.min()])
    hull = ConvexHull(X)
    return hull.equations[:, :-1], -hull.equations[:, -1]

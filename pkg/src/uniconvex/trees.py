"""Separated dyadic trees and bushes on finite supports.

A tree of height ``n`` maps binary strings of length at most ``n`` to points
with every node the exact midpoint of its two children.  Heights are computed
level by level: ``H_0`` is the whole support and ``H_{k+1}`` holds the
midpoints of separated pairs from ``H_k``.  A tree of height ``k + 1`` at ``x``
can be cut back to height ``k``, so the levels are nested.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .domain import (INF, NormSpec, Support, TabFunc, as_metric, at_least, iter_midpoint_triples,
                     lp_norm, norm_rows, support_from_points)
from .exceptions import CapExceeded, PreconditionError


@dataclass
class DyadicTree:
    height: int
    nodes: dict  # binary string -> point tuple

    @property
    def root(self):
        return self.nodes[""]

    def to_json(self) -> dict:
        return {"height": self.height, "nodes": {k: list(v) for k, v in sorted(self.nodes.items())}}

    @staticmethod
    def from_json(spec) -> "DyadicTree":
        return DyadicTree(int(spec["height"]), {k: tuple(map(float, v))
                                               for k, v in spec["nodes"].items()})


@dataclass
class Bush:
    height: int
    nodes: dict                      # tuple of ints -> point tuple
    weights: dict = field(default_factory=dict)   # child key -> weight

    def children(self, key):
        return sorted(k for k in self.nodes if len(k) == len(key) + 1 and k[:-1] == key)

    def to_json(self) -> dict:
        enc = lambda k: ",".join(map(str, k))
        return {"height": self.height,
                "nodes": {enc(k): list(v) for k, v in sorted(self.nodes.items())},
                "weights": {enc(k): w for k, w in sorted(self.weights.items())}}


def tree_to_bush(tree: DyadicTree) -> Bush:
    """View a dyadic tree as a bush with weights 1/2 (separation halves)."""
    nodes = {tuple(int(c) for c in k): v for k, v in tree.nodes.items()}
    weights = {k: 0.5 for k in nodes if k}
    return Bush(tree.height, nodes, weights)


# ---------------------------------------------------------------------------
# verification


def _exact_lattice(points):
    s = support_from_points(np.unique(np.asarray(points, dtype=float), axis=0))
    return s


def _distance(metric, support, a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if metric.kind == "norm":
        return float(metric.norm(a - b))
    if support is None:
        raise PreconditionError("a support is needed to evaluate this metric")
    i, j = support.locate(a), support.locate(b)
    return float(metric.pairs(support, np.array([i]), np.array([j]))[0])


def _check_midpoints(tree: DyadicTree):
    keys = sorted(tree.nodes)
    pts = [tree.nodes[k] for k in keys]
    s = _exact_lattice(pts)
    lat = {k: s.lattice[s.locate(tree.nodes[k])] for k in keys}
    for k in keys:
        if len(k) < tree.height:
            c0, c1 = k + "0", k + "1"
            if c0 not in lat or c1 not in lat:
                raise PreconditionError(f"node {k!r} is missing children")
            if np.any(2 * lat[k] != lat[c0] + lat[c1]):
                raise PreconditionError(f"node {k!r} is not the midpoint of its children")


def tree_separation_check(tree: DyadicTree, eps: float, metric=None,
                          support: Optional[Support] = None) -> bool:
    """True iff every sibling pair is at distance at least ``eps``."""
    _check_midpoints(tree)
    dim = len(tree.root)
    metric = as_metric(metric, dim)
    for k, x in tree.nodes.items():
        if len(k) < tree.height:
            d = _distance(metric, support, tree.nodes[k + "0"], tree.nodes[k + "1"])
            if not at_least(d, eps):
                return False
    return True


def glue_trees(x, y, tx: DyadicTree, ty: DyadicTree, eps: float, metric=None,
               support: Optional[Support] = None) -> DyadicTree:
    """Tree rooted at ``(x + y) / 2`` with ``tx`` and ``ty`` cut to a common height below it."""
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
    y = tuple(np.atleast_1d(np.asarray(y, dtype=float)).tolist())
    if not (np.allclose(tx.root, x) and np.allclose(ty.root, y)):
        raise PreconditionError("trees must be rooted at x and y")
    metric = as_metric(metric, len(x))
    if not at_least(_distance(metric, support, x, y), eps):
        raise PreconditionError("roots are closer than eps")
    mid = tuple(((np.array(x) + np.array(y)) / 2).tolist())
    if support is not None and not support.contains(mid):
        raise PreconditionError("midpoint of the roots is not representable")
    h = min(tx.height, ty.height)
    nodes = {"": mid}
    for k, v in tx.nodes.items():
        if len(k) <= h:
            nodes["0" + k] = v
    for k, v in ty.nodes.items():
        if len(k) <= h:
            nodes["1" + k] = v
    return DyadicTree(h + 1, nodes)


# ---------------------------------------------------------------------------
# search


@dataclass
class HeightTable:
    """Result of the level iteration on one support."""

    heights: np.ndarray          # per point, capped at ``cap``
    exceeded: np.ndarray         # True where the true height exceeds ``cap``
    levels: list                 # per level k >= 1: (first triple per midpoint as dict arrays)
    support: Support
    cap: int

    def witness(self, pos: int, height: int) -> DyadicTree:
        coords = self.support.coords
        nodes = {}

        def build(p, k, key):
            nodes[key] = tuple(coords[p].tolist())
            if k == 0:
                return
            y, z = self.levels[k - 1][p]
            build(y, k - 1, key + "0")
            build(z, k - 1, key + "1")

        build(pos, height, "")
        return DyadicTree(height, nodes)


def height_table(support: Support, eps: float, metric=None, cap: int = 64,
                 mask=None) -> HeightTable:
    """Maximal separated-tree height at every point of ``support`` (levels up to ``cap + 1``)."""
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    if cap < 1:
        raise PreconditionError("cap must be at least 1")
    metric = as_metric(metric, support.dim)
    trip = [t for t in iter_midpoint_triples(support, metric, eps, mask=mask)]
    if trip:
        I = np.concatenate([t[0] for t in trip])
        J = np.concatenate([t[1] for t in trip])
        M = np.concatenate([t[2] for t in trip])
    else:
        I = J = M = np.zeros(0, dtype=np.int64)
    alive = np.ones(support.n, dtype=bool) if mask is None else np.asarray(mask, bool).copy()
    heights = np.zeros(support.n, dtype=np.int64)
    levels = []
    exceeded = np.zeros(support.n, dtype=bool)
    for k in range(1, cap + 2):
        ok = alive[I] & alive[J]
        mids = M[ok]
        nxt = np.zeros(support.n, dtype=bool)
        nxt[mids] = True
        if k == cap + 1:
            exceeded = nxt
            break
        if not nxt.any():
            break
        uniq, first = np.unique(mids, return_index=True)
        sel = np.flatnonzero(ok)[first]
        levels.append({int(m): (int(I[t]), int(J[t])) for m, t in zip(uniq, sel)})
        heights[nxt] = k
        alive = nxt
    return HeightTable(heights, exceeded, levels, support, cap)


def max_separated_tree_height(support: Support, eps: float, metric=None, root=None,
                              cap: int = 64) -> dict:
    """Largest height of a separated tree inside ``support`` (rooted at ``root`` if given).

    Reports ``capped`` when the search stopped at ``cap``; the height is then a lower bound.
    """
    table = height_table(support, eps, metric, cap)
    if root is not None:
        pos = support.locate(root)
    else:
        pos = int(np.argmax(table.heights))
    h = int(table.heights[pos])
    capped = bool(table.exceeded[pos]) if root is not None else bool(table.exceeded.any())
    return {"height": h, "capped": capped, "root": support.coords[pos].tolist(),
            "witness": table.witness(pos, h)}


def height_function(support: Support, eps: float, metric=None, cap: int = 64) -> TabFunc:
    """``f(x) = -(maximal separated-tree height rooted at x)``."""
    table = height_table(support, eps, metric, cap)
    if table.exceeded.any():
        where = support.coords[int(np.argmax(table.exceeded))].tolist()
        raise CapExceeded(f"tree height exceeds cap {cap} at {where}", where=where)
    return TabFunc(support, 0.0 - table.heights.astype(float) + 0.0, f"height({eps})")


# ---------------------------------------------------------------------------
# bound of trees and bushes by bounded uniformly convex functions


def _values_at(f: TabFunc, pts):
    out = []
    for p in pts:
        if not f.support.contains(p):
            raise PreconditionError(f"node {list(p)} is off the support")
        out.append(float(f.values[f.support.locate(p)]))
    return np.array(out)


def bush_height_bound_check(bush, f: TabFunc, eps: float, metric=None,
                            delta: Optional[float] = None) -> dict:
    """Check ``height <= (b - a) / delta`` for a separated tree or bush.

    Trees use ``delta = delta_f(eps)`` and the recursion ``f(x_s) <= max f(children) - delta``;
    bushes use the modulus of the convex envelope and the weighted recursion.
    """
    from .envelope import convex_envelope
    from .moduli import delta_modulus

    metric = as_metric(metric, f.dim)
    is_tree = isinstance(bush, DyadicTree)
    if is_tree:
        if not tree_separation_check(bush, eps, metric, f.support):
            raise PreconditionError("tree is not separated")
        g = f
    else:
        for k, w in bush.weights.items():
            if w > 0 and not at_least(_distance(metric, f.support, bush.nodes[k],
                                                bush.nodes[k[:-1]]), eps):
                raise PreconditionError("bush is not separated")
        g = convex_envelope(f)
    keys = sorted(bush.nodes)
    vals = dict(zip(keys, _values_at(g, [bush.nodes[k] for k in keys])))
    if delta is None:
        delta = delta_modulus(g, eps, metric).delta
    a, b = min(vals.values()), max(vals.values())
    if bush.height == 0:
        return {"holds": True, "bound": INF, "height": 0, "delta": delta,
                "recursion_holds": True, "range": [a, b]}
    recursion = True
    for k in keys:
        if len(k) >= bush.height:
            continue
        if is_tree:
            rhs = max(vals[k + "0"], vals[k + "1"]) - delta
        else:
            kids = [c for c in keys if len(c) == len(k) + 1 and c[:-1] == k]
            rhs = sum(bush.weights.get(c, 0.0) * vals[c] for c in kids) - delta
        if vals[k] > rhs + 1e-9:
            recursion = False
    bound = (b - a) / delta if delta > 0 else INF
    return {"holds": bool(bush.height <= bound + 1e-9), "bound": bound, "height": bush.height,
            "delta": delta, "recursion_holds": recursion, "range": [a, b]}


# ---------------------------------------------------------------------------
# convex separation sequences


def _min_norm_point(P, tol=1e-12, max_iter=500):
    """Wolfe's algorithm: the point of least Euclidean norm in ``conv(P)``."""
    P = np.asarray(P, dtype=float)
    k = int(np.argmin((P * P).sum(axis=1)))
    S = [k]
    lam = np.array([1.0])
    x = P[k].copy()
    for _ in range(max_iter):
        j = int(np.argmin(P @ x))
        if x @ x - P[j] @ x <= tol * max(1.0, (P * P).sum(axis=1).max()) or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            Q = P[S]
            G = Q @ Q.T
            n = len(S)
            A = np.block([[G, np.ones((n, 1))], [np.ones((1, n)), np.zeros((1, 1))]])
            rhs = np.append(np.zeros(n), 1.0)
            mu = np.linalg.lstsq(A, rhs, rcond=None)[0][:n]
            if np.all(mu > tol):
                lam = mu
                break
            neg = mu <= tol
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, lam / (lam - mu), INF)
            theta = min(1.0, float(np.nanmin(ratios)))
            lam = (1 - theta) * lam + theta * mu
            keep = lam > tol
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ P[S]
    return x


def _polygon_distance_2d(D, rows) -> float:
    """Least ``max(rows @ z)`` over ``z`` in ``conv(D)``, exact for planar point sets."""
    D = np.unique(np.round(D, 12), axis=0)
    if D.shape[0] == 1:
        return max(0.0, float((rows @ D[0]).max()))
    try:
        hull = ConvexHull(D)
        if np.all(hull.equations[:, -1] <= 1e-12):
            return 0.0
        edges = hull.simplices
    except QhullError:
        # collinear: the hull is the segment between the extreme points
        u = D[-1] - D[0]
        proj = D @ u
        a, b = int(np.argmin(proj)), int(np.argmax(proj))
        edges = np.array([[a, b]])
    A, B = D[edges[:, 0]], D[edges[:, 1]]
    ra, rd = A @ rows.T, (B - A) @ rows.T             # lines ra + t rd per edge
    ts = [np.zeros(len(A)), np.ones(len(A))]
    m = rows.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            den = rd[:, i] - rd[:, j]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (ra[:, j] - ra[:, i]) / den
            ts.append(np.clip(np.where(np.isfinite(t), t, 0.0), 0.0, 1.0))
    T = np.stack(ts, axis=1)
    vals = (ra[:, None, :] + T[:, :, None] * rd[:, None, :]).max(axis=2)
    return max(0.0, float(vals.min()))


def hull_distance(P, Q, norm: NormSpec) -> float:
    """Distance between ``conv(P)`` and ``conv(Q)`` in ``norm``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if P.shape[1] == 1:
        gap = max(0.0, Q.min() - P.max(), P.min() - Q.max())
        return float(norm(np.array([gap])))
    rows = norm_rows(norm)
    if rows is None:
        D = (P[:, None, :] - Q[None, :, :]).reshape(-1, P.shape[1])
        return float(np.linalg.norm(_min_norm_point(D)))
    if P.shape[1] == 2:
        return _polygon_distance_2d((P[:, None, :] - Q[None, :, :]).reshape(-1, 2), rows)
    k, m = P.shape[0], Q.shape[0]
    # variables: alpha (k), beta (m), t
    A_ub = np.hstack([rows @ P.T, -(rows @ Q.T), -np.ones((rows.shape[0], 1))])
    b_ub = np.zeros(rows.shape[0])
    A_eq = np.zeros((2, k + m + 1))
    A_eq[0, :k] = 1
    A_eq[1, k:k + m] = 1
    c = np.zeros(k + m + 1)
    c[-1] = 1
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1, 1],
                  bounds=[(0, None)] * (k + m) + [(None, None)], method="highs")
    if res.status != 0:
        raise PreconditionError(f"hull distance program failed: {res.message}")
    return max(0.0, float(res.fun))


def sequence_separated(seq, eps: float, norm: NormSpec) -> bool:
    seq = np.atleast_2d(np.asarray(seq, dtype=float))
    for k in range(1, seq.shape[0]):
        if hull_distance(seq[:k], seq[k:], norm) < eps * (1 - 1e-9) - 1e-12:
            return False
    return True


def _segment_distances(X, A, B, rows):
    """Distances from every row of ``X`` to each segment ``[A_k, B_k]``; shape ``(len(X), k)``."""
    d = B - A
    if rows is None:
        L = (d * d).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((X[:, None, :] - A[None]) * d[None]).sum(axis=2) / L[None]
        t = np.clip(np.nan_to_num(t), 0.0, 1.0)
        return np.linalg.norm(A[None] + t[..., None] * d[None] - X[:, None, :], axis=2)
    ra = (A[None] - X[:, None, :]) @ rows.T         # (N, k, m)
    rd = d @ rows.T                                 # (k, m)
    best = np.minimum(ra.max(axis=2), (ra + rd[None]).max(axis=2))
    m = rows.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            den = rd[:, i] - rd[:, j]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (ra[..., j] - ra[..., i]) / den[None]
            t = np.clip(np.where(np.isfinite(t), t, 0.0), 0.0, 1.0)
            best = np.minimum(best, (ra + t[..., None] * rd[None]).max(axis=2))
    return np.maximum(best, 0.0)


def _distance_to_hull_2d(X, H, rows):
    """Exact distance from each planar point in ``X`` to ``conv(H)``."""
    H = np.unique(H, axis=0)
    if H.shape[0] == 1:
        diff = X - H[0]
        return np.linalg.norm(diff, axis=1) if rows is None else (diff @ rows.T).max(axis=1)
    inside = np.zeros(X.shape[0], bool)
    try:
        hull = ConvexHull(H)
        edges = hull.simplices
        inside = np.all(X @ hull.equations[:, :2].T + hull.equations[:, 2] <= 1e-12, axis=1)
    except QhullError:
        proj = H @ (H[-1] - H[0])
        edges = np.array([[int(np.argmin(proj)), int(np.argmax(proj))]])
    dist = _segment_distances(X, H[edges[:, 0]], H[edges[:, 1]], rows).min(axis=1)
    dist[inside] = 0.0
    return dist


def _cell_bound(X, eps, norm, shifts: int = 4) -> int:
    """Upper bound on the size of an ``eps``-separated subset of ``X``.

    Points in one half-open box of a lattice whose boxes have norm-diameter
    ``eps`` are less than ``eps`` apart, so each box holds at most one.  The
    smallest count over a few lattice offsets is returned.
    """
    dim = X.shape[1]
    corners = np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * dim)).reshape(dim, -1).T
    side = eps / float(np.max(norm(corners)))
    best = X.shape[0]
    offs = np.arange(shifts) / shifts
    for off in np.array(np.meshgrid(*[offs] * dim)).reshape(dim, -1).T:
        cells = np.floor(X / side + off).astype(np.int64)
        best = min(best, np.unique(cells, axis=0).shape[0])
    return int(best)


def _orbit_representatives(X, norm) -> np.ndarray:
    """Mask of one point per orbit under the signed coordinate permutations that
    map the point set onto itself and preserve ``norm``."""
    from itertools import permutations, product

    n, dim = X.shape
    keys = {tuple(k): i for i, k in enumerate(np.round(X, 9).tolist())}
    probe = np.random.default_rng(0).standard_normal((16, dim))
    base = norm(probe)
    maps = []
    for perm in permutations(range(dim)):
        for signs in product((1.0, -1.0), repeat=dim):
            G = np.zeros((dim, dim))
            G[np.arange(dim), list(perm)] = signs
            if not np.allclose(norm(probe @ G.T), base, rtol=1e-12, atol=1e-12):
                continue
            img = [keys.get(tuple(k)) for k in np.round(X @ G.T, 9).tolist()]
            if None not in img:
                maps.append(np.array(img))
    keep = np.ones(n, bool)
    for m in maps:
        keep &= np.arange(n) <= m
    return keep


def convex_separation_sequence(points, eps: float, n: int, norm: Optional[NormSpec] = None,
                               budget: int = 20000) -> dict:
    """Depth-first search for ``x_1..x_n`` with every split of hulls ``eps`` apart.

    Prefixes of a valid sequence are valid, and every later point lies ``eps`` away
    from the hull of the prefix, so candidates shrink as the prefix grows.
    ``exhaustive`` is False when the node budget ran out before the search finished.
    """
    if n > 64:
        raise PreconditionError("sequence length is capped at 64")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 1 and np.ndim(points) == 1:
        pts = pts.T
    norm = norm or lp_norm(pts.shape[1], 2)
    nodes = 0
    one_dim = pts.shape[1] == 1
    planar = pts.shape[1] == 2
    rows = norm_rows(norm)
    thr = eps * (1 - 1e-9) - 1e-12

    def ok_extension(seq_idx, cand):
        seq = pts[seq_idx + [cand]]
        if one_dim:
            return sequence_separated(seq, eps, norm)
        # every split has the new point on its right side; in the plane the last
        # split is already enforced by the candidate set
        for k in range(1, seq.shape[0] - (1 if planar else 0)):
            if hull_distance(seq[:k], seq[k:], norm) < thr:
                return False
        return True

    # d(conv S, c) <= d(x, c) for x in S, so pairwise distances prune for free
    far = norm(pts[:, None, :] - pts[None, :, :]) >= thr

    def remaining(seq_idx, cands):
        if planar and len(seq_idx) > 1:
            return cands & (_distance_to_hull_2d(pts, pts[seq_idx], rows) >= thr)
        return cands

    def dfs(seq_idx, cands):
        # the budget counts nodes that need hull checks, i.e. third and later points
        nonlocal nodes
        if len(seq_idx) == n:
            return seq_idx
        for c in np.flatnonzero(cands):
            c = int(c)
            if nodes > budget:
                return None
            if not seq_idx and not reps[c]:
                continue
            if len(seq_idx) >= 2:
                nodes += 1
                if not ok_extension(seq_idx, c):
                    continue
            nxt = seq_idx + [c]
            rest = cands & far[c]
            need = n - len(nxt)
            if int(rest.sum()) < need:
                continue
            rest = remaining(nxt, rest)
            if int(rest.sum()) < need or (need > 1 and _cell_bound(pts[rest], eps, norm) < need):
                continue
            got = dfs(nxt, rest)
            if got is not None:
                return got
        return None

    # symmetric images of a valid sequence are valid, so x_1 ranges over orbit representatives
    reps = _orbit_representatives(pts, norm)
    start = np.ones(pts.shape[0], bool)
    found = None if _cell_bound(pts, eps, norm) < n else dfs([], start)
    return {"witness": None if found is None else pts[found].tolist(),
            "exhaustive": nodes <= budget, "nodes": nodes}

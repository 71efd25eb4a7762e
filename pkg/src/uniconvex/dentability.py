"""Slice derivations of finite sets relative to a map, and the functions they produce.

A map ``F`` on a support is given through its pullback pseudometric
``d(x, y) = N'(F(x) - F(y))``; the identity map is the norm metric.  Sets are
boolean masks over the support.  Halfspaces come from a finite dictionary of
functionals, and for each functional the thresholds run over the distinct
values it takes on the current set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import INF, Support, TabFunc, as_metric, dual_norm, iter_midpoint_triples, lp_norm
from .exceptions import CapExceeded, PreconditionError

CAP_EXCEEDED = "cap-exceeded"


def default_dictionary(dim: int, count: Optional[int] = None) -> np.ndarray:
    """Signed axes plus evenly spread unit directions (64 in the plane, 146 in space)."""
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    if dim == 1:
        return axes
    if dim == 2:
        m = count or 64
        th = 2 * np.pi * np.arange(m) / m
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    else:
        m = count or 146
        k = np.arange(m) + 0.5
        z = 1 - 2 * k / m
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5 ** 0.5) * k
        dirs = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    W = np.vstack([axes, dirs])
    W[np.abs(W) < 1e-15] = 0.0
    _, keep = np.unique(np.round(W, 12), axis=0, return_index=True)
    return W[np.sort(keep)]


def as_dictionary(dictionary, dim: int) -> np.ndarray:
    if dictionary is None:
        return default_dictionary(dim)
    if isinstance(dictionary, str):
        if dictionary == "axes":
            return np.vstack([np.eye(dim), -np.eye(dim)])
        if dictionary.endswith("-directions"):
            return default_dictionary(dim, int(dictionary.split("-")[0]))
        raise PreconditionError(f"unknown dictionary {dictionary!r}")
    W = np.asarray(dictionary, dtype=float).reshape(-1, dim)
    if W.shape[0] == 0:
        raise PreconditionError("empty functional dictionary")
    return W


@dataclass
class SliceSpec:
    functional: np.ndarray
    alpha: float
    base: np.ndarray  # boolean mask

    def members(self, support: Support) -> np.ndarray:
        p = support.coords @ self.functional
        top = p[self.base].max()
        return self.base & (p > top - self.alpha)


@dataclass
class DerivationTrace:
    stages: list
    eps: float
    dictionary: np.ndarray
    dz: object
    kind: str = "full"
    fixpoint: bool = False

    def to_json(self, support: Optional[Support] = None) -> dict:
        out = {"eps": self.eps, "kind": self.kind, "dz": self.dz, "fixpoint": self.fixpoint,
               "dictionary_size": int(len(self.dictionary)),
               "stage_sizes": [int(s.sum()) for s in self.stages]}
        if support is not None:
            out["stages"] = [support.coords[s].tolist() for s in self.stages]
        return out


# ---------------------------------------------------------------------------
# small-prefix search


def _scalar_values(support, metric):
    """Scalar embedding when ``d`` is the absolute difference of one number."""
    if metric.kind == "norm" and support.dim == 1:
        return support.coords[:, 0] * float(metric.norm(np.array([1.0])))
    if metric.kind == "pullback" and metric.values.shape[1] == 1:
        return metric.values[:, 0]
    return None


def _small_prefix(support, idx, proj, eps, metric, scalar, strict=False):
    """Number ``K`` of leading value groups (by descending ``proj``) whose union has
    diameter at most ``eps`` (below ``eps`` if ``strict``), plus the group values."""
    order = np.argsort(-proj, kind="stable")
    idx, proj = idx[order], proj[order]
    vals, starts = np.unique(-proj, return_index=True)
    vals = -vals
    bounds = np.append(starts, idx.size)
    lim = eps + 1e-12 * max(1.0, eps)

    def small(d):
        return d < eps * (1 - 1e-12) if strict else d <= lim

    if scalar is not None:
        v = scalar[idx]
        hi = np.maximum.accumulate(v)
        lo = np.minimum.accumulate(v)
        diam = (hi - lo)[bounds[1:] - 1]
        good = small(diam)
        K = int(np.argmin(good)) if not good.all() else len(vals)
        return K, vals
    K = 0
    diam = 0.0
    for g in range(len(vals)):
        new = idx[bounds[g]:bounds[g + 1]]
        seen = idx[:bounds[g + 1]]
        I = np.repeat(new, seen.size)
        J = np.tile(seen, new.size)
        diam = max(diam, float(metric.pairs(support, I, J).max()))
        if not small(diam):
            break
        K = g + 1
    return K, vals


def _project(coords, w):
    # rounding merges values that differ only by floating-point noise
    return np.round(coords @ w, 12)


def _candidates(support, mask, w, eps, metric):
    idx = np.flatnonzero(mask)
    proj = _project(support.coords[idx], w)
    if metric.kind == "norm":
        # points further than eps below the top cannot join a small slice
        reach = float(dual_norm(metric.norm)(w)) * eps * (1 + 1e-9) + 1e-12
        keep = proj >= proj.max() - reach
        # keep one group beyond so the stop value is known
        rest = proj[~keep]
        if rest.size:
            nxt = rest.max()
            keep |= proj == nxt
        idx, proj = idx[keep], proj[keep]
    return idx, proj


def derive_once(support: Support, mask, eps: float, dictionary=None, metric=None) -> np.ndarray:
    """Remove every point lying in a dictionary halfspace whose part of the set has
    ``F``-diameter at most ``eps``."""
    mask = np.asarray(mask, dtype=bool)
    metric = as_metric(metric, support.dim)
    W = as_dictionary(dictionary, support.dim)
    if not mask.any():
        return mask.copy()
    scalar = _scalar_values(support, metric)
    coords = support.coords
    out = mask.copy()
    for w in W:
        idx, proj = _candidates(support, mask, w, eps, metric)
        K, vals = _small_prefix(support, idx, proj, eps, metric, scalar)
        if K == 0:
            continue
        full = _project(support.coords[mask], w)
        if K == len(np.unique(full)):
            out[:] = False
            return out
        cut = vals[K - 1]
        out &= ~(mask & (_project(coords, w) >= cut - 1e-12 * max(1.0, abs(cut))))
    return out


def half_derive(support: Support, mask, eps: float, dictionary=None, metric=None,
                mode: str = "prose") -> np.ndarray:
    """Half-derivation: for each small slice remove the half nearer the top.

    With ``sup`` the top value and ``v`` the first value outside the largest slice of
    diameter below ``eps``, ``prose`` removes ``<w, x> > (sup + v) / 2`` and ``formula``
    keeps only ``<w, x> <= (sup - v) / 2``.
    """
    if mode not in ("prose", "formula"):
        raise PreconditionError("mode must be 'prose' or 'formula'")
    mask = np.asarray(mask, dtype=bool)
    metric = as_metric(metric, support.dim)
    W = as_dictionary(dictionary, support.dim)
    if not mask.any():
        return mask.copy()
    scalar = _scalar_values(support, metric)
    coords = support.coords
    out = mask.copy()
    for w in W:
        idx, proj = _candidates(support, mask, w, eps, metric)
        K, vals = _small_prefix(support, idx, proj, eps, metric, scalar, strict=True)
        if K == 0:
            continue
        full = np.unique(_project(coords[mask], w))[::-1]
        if K >= full.size:
            out[:] = False
            return out
        top, nxt = full[0], full[K]
        p = _project(coords, w)
        if mode == "prose":
            cut = 0.5 * (top + nxt)
            out &= ~(mask & (p > cut + 1e-12 * max(1.0, abs(cut))))
        else:
            cut = 0.5 * (top - nxt)
            out &= ~(mask & (p > cut + 1e-12 * max(1.0, abs(cut))))
    return out


def dz_index(support: Support, mask=None, eps: float = 0.0, dictionary=None, metric=None,
             cap: int = 64, kind: str = "full", mode: str = "prose") -> DerivationTrace:
    """Iterate the derivation until the set is empty, a nonempty fixpoint, or ``cap`` steps."""
    if cap < 1:
        raise PreconditionError("cap must be at least 1")
    mask = np.ones(support.n, bool) if mask is None else np.asarray(mask, dtype=bool)
    W = as_dictionary(dictionary, support.dim)
    step = (lambda m: derive_once(support, m, eps, W, metric)) if kind == "full" else \
        (lambda m: half_derive(support, m, eps, W, metric, mode))
    stages = [mask.copy()]
    cur = mask
    for n in range(1, cap + 1):
        if not cur.any():
            return DerivationTrace(stages, eps, W, n - 1, kind)
        nxt = step(cur)
        stages.append(nxt)
        if not nxt.any():
            return DerivationTrace(stages, eps, W, n, kind)
        if np.array_equal(nxt, cur):
            return DerivationTrace(stages, eps, W, CAP_EXCEEDED, kind, fixpoint=True)
        cur = nxt
    return DerivationTrace(stages, eps, W, CAP_EXCEEDED, kind)


# ---------------------------------------------------------------------------


def segment_points(support: Support, x, y) -> np.ndarray:
    """Support positions of the lattice points on the closed segment ``[x, y]``."""
    a = support.to_lattice(x)[0]
    b = support.to_lattice(y)[0]
    diff = b - a
    g = int(np.gcd.reduce(np.abs(diff))) if np.any(diff) else 0
    if g == 0:
        pts = a[None, :]
    else:
        pts = a + np.arange(g + 1)[:, None] * (diff // g)
    pos = support.lookup(pts)
    if np.any(pos < 0):
        raise PreconditionError("segment is not representable on the support")
    return pos


def lancien_check(x, y, support: Support, D, derived, eps: float, metric=None) -> bool:
    """For a segment inside ``D`` missing ``derived``: ``d(F(x), F(y)) <= 2 eps``."""
    pos = segment_points(support, x, y)
    D = np.asarray(D, bool)
    derived = np.asarray(derived, bool)
    if not D[pos].all():
        raise PreconditionError("segment leaves D")
    if derived[pos].any():
        raise PreconditionError("segment meets the derived set")
    metric = as_metric(metric, support.dim)
    d = float(metric.pairs(support, pos[:1], pos[-1:])[0])
    return bool(d <= 2 * eps + 1e-9)


def implication_delta(phi: TabFunc, eps: float, metric=None) -> float:
    """A ``delta > 0`` with ``Delta_phi(x, y) <= delta  =>  d(x, y) <= eps`` on all
    representable pairs; ``inf`` when no pair is further apart than ``eps``.

    Raises when some pair further apart than ``eps`` has a nonpositive gap.
    """
    metric = as_metric(metric, phi.dim)
    v = phi.values
    far_min = INF
    spectrum = []
    for i, j, m in iter_midpoint_triples(phi.support, mask=phi.dom):
        gap = 0.5 * (v[i] + v[j]) - v[m]
        d = metric.pairs(phi.support, i, j)
        far = d > eps * (1 + 1e-12) + 1e-15
        if far.any():
            far_min = min(far_min, float(gap[far].min()))
        spectrum.append(gap)
    if not math.isfinite(far_min):
        return INF
    if far_min <= 0:
        raise PreconditionError("a pair further apart than eps has a nonpositive gap")
    gaps = np.concatenate(spectrum)
    below = gaps[gaps < far_min]
    best = float(below.max()) if below.size else -INF
    return max(best, 0.5 * far_min)


def uc_function_from_derivation(support: Support, mask=None, eps_prime: float = 1.0,
                                dictionary=None, metric=None, cap: int = 64,
                                mode: str = "prose"):
    """Convex ``Phi`` and ``delta > 0`` with ``Delta_Phi <= delta => d <= eps_prime``.

    ``g = -n`` on the ``n``-th layer of the half-derivation at ``eps_prime``,
    ``Phi`` is the convex envelope of ``3 ** g`` on the set.
    """
    from .envelope import convex_envelope
    from .transforms import exp_transform

    mask = np.ones(support.n, bool) if mask is None else np.asarray(mask, dtype=bool)
    trace = dz_index(support, mask, eps_prime, dictionary, metric, cap, kind="half", mode=mode)
    if trace.dz == CAP_EXCEEDED:
        raise CapExceeded(f"half-derivation did not empty within {cap} steps", where="dent")
    layer = np.zeros(support.n)
    for n, st in enumerate(trace.stages):
        layer[st] = -n
    sub = support.subset(mask)
    g = TabFunc(sub, layer[mask], "layers")
    phi = convex_envelope(exp_transform(g, 1.0))
    sub_metric = as_metric(metric, support.dim).restrict(mask)
    delta = implication_delta(phi, eps_prime, sub_metric)
    return phi, delta


def finitely_dentable_series(support: Support, mask=None, eps_list=(), dictionary=None,
                             metric=None, cap: int = 64, mode: str = "prose"):
    """``Phi = sum 2**-n Phi_n / (1 + sup Phi_n)`` over the single-scale constructions."""
    eps_list = list(eps_list)
    if not eps_list:
        raise PreconditionError("empty list of scales")
    total, parts = None, []
    for n, e in enumerate(eps_list, start=1):
        phi, delta = uc_function_from_derivation(support, mask, e, dictionary, metric, cap, mode)
        w = 2.0 ** -n / (1.0 + phi.sup())
        parts.append({"eps": e, "delta": delta, "weight": w})
        total = phi.values * w if total is None else total + w * phi.values
    return TabFunc(phi.support, total, "dentable-series"), parts


def halving_containment(support: Support, mask, eps: float, eta: float, dictionary=None,
                        metric=None, norm=None) -> dict:
    """Check that ``n`` half-derivations at ``2 eps`` land within ``eta`` of ``[C]'_eps``,
    where ``n`` halves the widest dictionary gap below ``eta``."""
    mask = np.asarray(mask, dtype=bool)
    W = as_dictionary(dictionary, support.dim)
    norm = norm or lp_norm(support.dim, 2)
    derived = derive_once(support, mask, eps, W, metric)
    coords = support.coords
    if derived.any():
        width = max(float((coords[mask] @ w).max() - (coords[derived] @ w).max()) for w in W)
    else:
        width = max(float(np.ptp(coords[mask] @ w)) for w in W)
    n = max(1, math.ceil(math.log2(max(width, eta) / eta)))
    cur = mask
    for _ in range(n):
        cur = half_derive(support, cur, 2 * eps, W, metric)
    pts = coords[cur]
    if not pts.size:
        return {"holds": True, "n": n, "max_distance": 0.0}
    if not derived.any():
        return {"holds": False, "n": n, "max_distance": INF}
    D = coords[derived]
    dist = np.array([float(norm(D - p).min()) for p in pts])
    return {"holds": bool(dist.max() <= eta * (1 + 1e-9)), "n": n,
            "max_distance": float(dist.max())}

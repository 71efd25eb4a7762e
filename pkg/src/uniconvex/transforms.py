"""Combinators producing new tabulated functions from old ones."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import (INF, NormSpec, Support, TabFunc, box_grid, lp_norm, make_dyadic_grid)
from .exceptions import PreconditionError
from .moduli import SampledModulus, is_midpoint_convex, l2_modulus


@dataclass
class TransformRecord:
    kind: str
    inputs: list
    params: dict
    output: TabFunc

    def to_json(self) -> dict:
        return {"kind": self.kind, "inputs": self.inputs, "params": self.params,
                "output": self.output.to_json()}


def _pairwise_blocks(n_rows, n_cols, budget=1 << 21):
    rows = max(1, budget // max(n_cols, 1))
    for s in range(0, n_rows, rows):
        yield np.arange(s, min(n_rows, s + rows))


def _same_support(a: Support, b: Support) -> bool:
    return a is b or (a.n == b.n and a.same_lattice(b)
                      and np.allclose(a.coords, b.coords, rtol=0, atol=1e-12 * max(1.0, a.unit)))


def support_from_lattice(lat, origin, unit) -> Support:
    """Support on sorted unique lattice points; tagged as a grid when it fills its box."""
    lat = np.unique(np.asarray(lat, dtype=np.int64), axis=0)
    lo = lat.min(axis=0)
    ext = lat.max(axis=0) - lo + 1
    if lat.shape[0] == int(np.prod(ext)) and np.all(ext >= 2):
        grid = make_dyadic_grid(np.asarray(origin) + unit * lo, unit, ext)
        return grid.support
    return Support(lat, origin, unit)


# ---------------------------------------------------------------------------


def inf_convolution(f1: TabFunc, f2: TabFunc, on: Support | None = None) -> TabFunc:
    """Exact infimal convolution ``min_y f1(x - y) + f2(y)`` over the finite supports.

    The result lives on the Minkowski sum of the domains, or on ``on`` when given
    (points with no representation get ``+inf``).
    """
    s1, s2 = f1.support, f2.support
    if s1.dim != s2.dim or not math.isclose(s1.unit, s2.unit, rel_tol=1e-12):
        raise PreconditionError("inf-convolution needs supports on a common grid")
    d1 = np.flatnonzero(f1.dom)
    d2 = np.flatnonzero(f2.dom)
    L1, L2 = s1.lattice[d1], s2.lattice[d2]
    v1, v2 = f1.values[d1], f2.values[d2]
    origin = s1.origin + s2.origin
    if on is None:
        sums = (L1[:, None, :] + L2[None, :, :]).reshape(-1, s1.dim)
        target = support_from_lattice(sums, origin, s1.unit)
    else:
        target = on
        shift = (target.origin - origin) / s1.unit
        if np.any(np.abs(shift - np.rint(shift)) > 1e-9) or \
                not math.isclose(target.unit, s1.unit, rel_tol=1e-12):
            raise PreconditionError("target support is not on the common grid")
    # target lattice expressed relative to the Minkowski-sum origin
    tshift = np.rint((target.origin - origin) / s1.unit).astype(np.int64)
    out = np.full(target.n, INF)
    for rows in _pairwise_blocks(len(d2), len(d1)):
        tot = (L1[None, :, :] + L2[rows][:, None, :]).reshape(-1, s1.dim) - tshift
        pos = target.lookup(tot)
        val = (v1[None, :] + v2[rows][:, None]).ravel()
        ok = pos >= 0
        np.minimum.at(out, pos[ok], val[ok])
    name = f"{f1.name or 'f1'} infconv {f2.name or 'f2'}"
    return TabFunc(target, out, name)


def exp_transform(f: TabFunc, delta: float, base: float = 3.0) -> TabFunc:
    """Pointwise ``3 ** (f / delta)``; ``+inf`` stays ``+inf``."""
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    with np.errstate(over="ignore"):
        out = np.power(base, f.values / delta)
    if np.any(np.isinf(out) & f.dom):
        raise PreconditionError("exponential transform overflows; increase delta")
    return f.with_values(out, name=f"exp({f.name})" if f.name else "exp")


def exp_gap_bound(f: TabFunc, delta: float, base: float = 3.0) -> float:
    """Guaranteed convexity gap ``3 ** (inf f / delta) / 2`` of the exponential transform."""
    return 0.5 * base ** (f.inf() / delta)


def lipschitz_regularization(f: TabFunc, C, c: float, norm: NormSpec | None = None) -> TabFunc:
    """``g(x) = min{f(y) + c N(x - y) : y in C}`` on the whole support of ``f``."""
    if not c > 0:
        raise PreconditionError("Lipschitz constant must be positive")
    norm = norm or lp_norm(f.dim, 2)
    C = np.ones(f.support.n, dtype=bool) if C is None else np.asarray(C, dtype=bool)
    src = np.flatnonzero(C & f.dom)
    if src.size == 0:
        raise PreconditionError("C does not meet dom(f)")
    X = f.coords
    out = np.full(f.support.n, INF)
    for rows in _pairwise_blocks(f.support.n, src.size):
        d = norm(X[rows][:, None, :] - X[src][None, :, :])
        out[rows] = (f.values[src][None, :] + c * d).min(axis=1)
    return f.with_values(out, name=f"lip({f.name})" if f.name else "lip")


def lipschitz_constant(f: TabFunc, norm: NormSpec | None = None) -> float:
    """Largest ``|f(x) - f(y)| / N(x - y)`` over pairs in ``dom(f)``."""
    norm = norm or lp_norm(f.dim, 2)
    dom = np.flatnonzero(f.dom)
    X, v = f.coords[dom], f.values[dom]
    best = 0.0
    for rows in _pairwise_blocks(dom.size, dom.size):
        d = norm(X[rows][:, None, :] - X[None, :, :])
        dv = np.abs(v[rows][:, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / d, 0.0)
        best = max(best, float(q.max()))
    return best


def domain_enlargement(f: TabFunc, eta: float, norm: NormSpec | None = None,
                       ambient: Support | None = None) -> TabFunc:
    """Open-ball infimum ``g(x) = min{f(y) : N(y - x) < eta}`` on ``ambient``."""
    if not eta > 0:
        raise PreconditionError("eta must be positive")
    norm = norm or lp_norm(f.dim, 2)
    ambient = ambient or f.support
    dom = np.flatnonzero(f.dom)
    Y, v = f.coords[dom], f.values[dom]
    Q = ambient.coords
    out = np.full(ambient.n, INF)
    for rows in _pairwise_blocks(ambient.n, dom.size):
        d = norm(Q[rows][:, None, :] - Y[None, :, :])
        vals = np.where(d < eta * (1 - 1e-12), v[None, :], INF)
        out[rows] = vals.min(axis=1)
    return TabFunc(ambient, out, f"enlarge({f.name})" if f.name else "enlarge")


def square_transform(f: TabFunc) -> TabFunc:
    if np.any(f.values[f.dom] < 0):
        raise PreconditionError("square transform needs a nonnegative function")
    return f.with_values(f.values ** 2, name=f"sq({f.name})" if f.name else "sq")


def series_combine(fs, weights) -> TabFunc:
    """Pointwise ``sum w_k f_k``; ``+inf`` propagates."""
    fs = list(fs)
    weights = [float(w) for w in weights]
    if not fs or len(fs) != len(weights):
        raise PreconditionError("need one positive weight per function")
    if any(not (w > 0 and math.isfinite(w)) for w in weights):
        raise PreconditionError("weights must be positive and finite")
    base = fs[0].support
    for g in fs[1:]:
        if not _same_support(base, g.support):
            raise PreconditionError("series terms live on different supports")
    out = np.zeros(base.n)
    for g, w in zip(fs, weights):
        out = out + w * g.values
    return TabFunc(base, out, "series")


def add_convex(f: TabFunc, g: TabFunc) -> TabFunc:
    """``f + g`` for convex ``g`` on the same support."""
    if not _same_support(f.support, g.support):
        raise PreconditionError("summands live on different supports")
    if not is_midpoint_convex(g):
        raise PreconditionError("second summand must be convex")
    return f.with_values(f.values + g.values, name=f"{f.name}+{g.name}")


def sup_finite(fs) -> TabFunc:
    fs = list(fs)
    if not fs:
        raise PreconditionError("empty family")
    base = fs[0].support
    out = fs[0].values
    for g in fs[1:]:
        if not _same_support(base, g.support):
            raise PreconditionError("functions live on different supports")
        out = np.maximum(out, g.values)
    return TabFunc(base, out, "sup")


# ---------------------------------------------------------------------------
# radial functions


def _solve_next_radius(prev, eps, modulus, tol=1e-10):
    def phi(a):
        return (1.0 - modulus(eps / a)) * a - prev

    lo, hi = prev, 2.0 * prev
    if modulus(min(2.0, eps / prev)) <= 1e-6:
        raise PreconditionError("norm not uniformly convex")
    while phi(hi) < 0:
        hi *= 2.0
        if hi > 1e12 * prev:
            raise PreconditionError("norm not uniformly convex")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi


def radial_uc(norm: NormSpec, eps: float, levels: int, support: Support | None = None,
              modulus=None):
    """Radii ``a_1 < a_2 < ...`` and the step function ``n`` on ``a_{n-1} < N(x) <= a_n``.

    ``modulus`` is the modulus of convexity of ``norm``; by default the exact one
    for the Euclidean norm and a sphere-sampled estimate otherwise.
    """
    if not eps > 0 or levels < 1:
        raise PreconditionError("need eps > 0 and at least one level")
    if modulus is None:
        if norm.kind == "lp" and norm.p == 2:
            modulus = l2_modulus
        elif norm.kind == "lp":
            raise PreconditionError("norm not uniformly convex")
        else:
            modulus = SampledModulus(norm)
    radii = [eps / 2.0]
    for _ in range(levels - 1):
        radii.append(_solve_next_radius(radii[-1], eps, modulus))
    radii = np.array(radii)
    if support is None:
        step = radii[0] / 8
        top = math.ceil(radii[-1] / step) * step
        support = box_grid(-top, top, step, norm.dim).support
    nx = norm(support.coords)
    level = np.searchsorted(radii, nx * (1 - 1e-12), side="left") + 1.0
    vals = np.where(level <= levels, level, INF)
    return radii, TabFunc(support, vals, f"radial({eps})")

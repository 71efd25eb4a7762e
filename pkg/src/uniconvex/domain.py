"""Finite domains: lattice supports, dyadic grids, norms, pseudometrics and tabulated functions.

Every support stores its points as integer lattice coordinates
``origin + unit * lattice`` so that midpoints are decided exactly on
integers.  Values are floats where ``math.inf`` plays the role of the
extended value ``+inf``; ``-inf`` and ``nan`` are rejected.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .exceptions import PreconditionError

INF = math.inf
MAX_DIM = 3

# relative slack used when comparing floating distances against eps
DIST_RTOL = 1e-12


def at_least(d, eps):
    """Boolean mask ``d >= eps`` robust to rounding of exact lattice distances."""
    return d >= eps * (1.0 - DIST_RTOL) - 1e-15


def at_most(d, eps):
    return d <= eps * (1.0 + DIST_RTOL) + 1e-15


# ---------------------------------------------------------------------------
# supports


class Support:
    """A finite point set living on an integer lattice."""

    def __init__(self, lattice, origin, unit, grid=None):
        lattice = np.asarray(lattice, dtype=np.int64)
        if lattice.ndim == 1:
            lattice = lattice[:, None]
        if lattice.shape[0] == 0:
            raise PreconditionError("empty support")
        self.lattice = lattice
        self.origin = np.asarray(origin, dtype=float).reshape(-1)
        self.unit = float(unit)
        self.grid = grid
        if self.origin.shape[0] != lattice.shape[1]:
            raise PreconditionError("origin dimension does not match lattice")
        if lattice.shape[1] > MAX_DIM:
            raise PreconditionError(f"dimension {lattice.shape[1]} exceeds cap {MAX_DIM}")
        self.coords = self.origin + self.unit * lattice.astype(float)
        self.lo = lattice.min(axis=0)
        self.ext = lattice.max(axis=0) - self.lo + 1
        box = int(np.prod(self.ext))
        self.dense = box <= max(64 * self.n, 1 << 16) and box <= 50_000_000
        keys = self._keys(lattice)
        if self.dense:
            self.box_pos = np.full(box, -1, dtype=np.int64)
            self.box_pos[keys] = np.arange(self.n)
            if np.count_nonzero(self.box_pos >= 0) != self.n:
                raise PreconditionError("support contains duplicate points")
            self.box_pos = self.box_pos.reshape(tuple(self.ext))
        else:
            order = np.argsort(keys, kind="stable")
            self._sorted_keys = keys[order]
            self._order = order
            if np.any(np.diff(self._sorted_keys) == 0):
                raise PreconditionError("support contains duplicate points")

    # -- basic properties
    @property
    def n(self) -> int:
        return self.lattice.shape[0]

    @property
    def dim(self) -> int:
        return self.lattice.shape[1]

    def _keys(self, lat):
        rel = lat - self.lo
        return np.ravel_multi_index(tuple(rel.T), tuple(self.ext), mode="wrap")

    def lookup(self, lat) -> np.ndarray:
        """Positions of lattice points (``-1`` where absent)."""
        lat = np.asarray(lat, dtype=np.int64)
        shape = lat.shape[:-1]
        lat = lat.reshape(-1, self.dim)
        rel = lat - self.lo
        inside = np.all((rel >= 0) & (rel < self.ext), axis=1)
        out = np.full(lat.shape[0], -1, dtype=np.int64)
        if inside.any():
            keys = np.ravel_multi_index(tuple(rel[inside].T), tuple(self.ext))
            if self.dense:
                out[inside] = self.box_pos.reshape(-1)[keys]
            else:
                k = np.searchsorted(self._sorted_keys, keys)
                k = np.minimum(k, self.n - 1)
                hit = self._sorted_keys[k] == keys
                res = np.where(hit, self._order[k], -1)
                out[inside] = res
        return out.reshape(shape)

    def to_lattice(self, points, strict=True) -> np.ndarray:
        """Convert coordinates to lattice integers; raise if off-lattice."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise PreconditionError("point dimension mismatch")
        raw = (pts - self.origin) / self.unit
        lat = np.rint(raw)
        if strict and np.any(np.abs(raw - lat) > 1e-7):
            raise PreconditionError("point is not representable on the support lattice")
        return lat.astype(np.int64)

    def locate(self, point) -> int:
        pos = int(self.lookup(self.to_lattice(point))[0])
        if pos < 0:
            raise PreconditionError(f"point {np.asarray(point).tolist()} is not in the support")
        return pos

    def contains(self, point) -> bool:
        try:
            return int(self.lookup(self.to_lattice(point))[0]) >= 0
        except PreconditionError:
            return False

    def subset(self, mask) -> "Support":
        mask = np.asarray(mask, dtype=bool)
        return Support(self.lattice[mask], self.origin, self.unit)

    def negation_index(self) -> np.ndarray:
        """Position of ``-x`` for every support point (``-1`` if absent)."""
        twice = np.rint(-2.0 * self.origin / self.unit)
        if np.any(np.abs(-2.0 * self.origin / self.unit - twice) > 1e-9):
            return np.full(self.n, -1, dtype=np.int64)
        return self.lookup(twice.astype(np.int64) - self.lattice)

    def same_lattice(self, other: "Support") -> bool:
        if self.dim != other.dim or not math.isclose(self.unit, other.unit, rel_tol=1e-12):
            return False
        shift = (other.origin - self.origin) / self.unit
        return bool(np.all(np.abs(shift - np.rint(shift)) < 1e-9))

    @cached_property
    def diameter(self) -> float:
        span = self.coords.max(axis=0) - self.coords.min(axis=0)
        return float(np.linalg.norm(span))

    # -- serialization
    def to_json(self) -> dict:
        if self.grid is not None:
            return self.grid.to_json()
        return {"kind": "points", "coords": self.coords.tolist()}

    @staticmethod
    def from_json(spec: dict) -> "Support":
        kind = spec.get("kind")
        if kind == "grid":
            return make_dyadic_grid(spec["origin"], spec["spacing"], spec["shape"]).support
        if kind == "points":
            return support_from_points(spec["coords"])
        raise PreconditionError(f"unknown domain kind {kind!r}")


def _as_fraction(x: float) -> Fraction:
    fr = Fraction(x).limit_denominator(1 << 24)
    if abs(float(fr) - x) > 1e-13 * max(1.0, abs(x)):
        fr = Fraction(x)
    return fr


def support_from_points(coords) -> Support:
    """Build a support from explicit coordinates, recovering a common rational lattice."""
    pts = np.asarray(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise PreconditionError("empty point set")
    fr = [[_as_fraction(float(v)) for v in row] for row in pts]
    origin = [min(row[a] for row in fr) for a in range(pts.shape[1])]
    rel = [[row[a] - origin[a] for a in range(pts.shape[1])] for row in fr]
    den = reduce(math.lcm, (v.denominator for row in rel for v in row), 1)
    ints = [[int(v * den) for v in row] for row in rel]
    g = reduce(math.gcd, (abs(v) for row in ints for v in row), 0) or 1
    lattice = np.array([[v // g for v in row] for row in ints], dtype=np.int64)
    unit = Fraction(g, den)
    return Support(lattice, [float(o) for o in origin], float(unit))


@dataclass(frozen=True)
class DyadicGrid:
    origin: tuple
    spacing: float
    shape: tuple

    @property
    def dim(self) -> int:
        return len(self.shape)

    @cached_property
    def support(self) -> Support:
        lat = np.indices(self.shape).reshape(self.dim, -1).T
        return Support(lat, self.origin, self.spacing, grid=self)

    def to_json(self) -> dict:
        return {"kind": "grid", "origin": list(self.origin), "spacing": self.spacing,
                "shape": list(self.shape)}


def make_dyadic_grid(origin, spacing, shape) -> DyadicGrid:
    """Row-major grid ``origin + spacing * index`` with ``shape`` points per axis."""
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    origin = tuple(float(o) for o in np.atleast_1d(origin))
    if len(shape) > MAX_DIM:
        raise PreconditionError(f"grid dimension {len(shape)} exceeds cap {MAX_DIM}")
    if len(origin) != len(shape):
        raise PreconditionError("origin and shape dimensions differ")
    if not spacing > 0:
        raise PreconditionError("spacing must be positive")
    if any(s < 2 for s in shape):
        raise PreconditionError("every axis needs at least 2 points")
    return DyadicGrid(origin, float(spacing), shape)


def interval_grid(lo, hi, step) -> DyadicGrid:
    n = int(round((hi - lo) / step)) + 1
    return make_dyadic_grid([lo], step, [n])


def box_grid(lo, hi, step, dim) -> DyadicGrid:
    n = int(round((hi - lo) / step)) + 1
    return make_dyadic_grid([lo] * dim, step, [n] * dim)


# ---------------------------------------------------------------------------
# norms


class PolytopeGauge:
    """Minkowski functional of ``conv(vertices)``; zero must be interior."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        self.vertices = v
        self.dim = v.shape[1]
        scale = max(1.0, float(np.abs(v).max()))
        if self.dim == 1:
            hi, lo = float(v.max()), float(v.min())
            if not (hi > 1e-12 * scale and lo < -1e-12 * scale):
                raise PreconditionError("degenerate polytope: 0 is not interior")
            self._hi, self._lo = hi, lo
            self.A = np.array([[1.0 / hi], [1.0 / lo]])
        else:
            try:
                hull = ConvexHull(v)
            except QhullError as exc:
                raise PreconditionError(f"degenerate polytope: {exc}") from None
            normals, offs = hull.equations[:, :-1], hull.equations[:, -1]
            if np.any(offs > -1e-12 * scale):
                raise PreconditionError("degenerate polytope: 0 is not interior")
            self.A = normals / (-offs)[:, None]
            self.extreme = v[hull.vertices]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.dim)
        out = np.empty(flat.shape[0])
        for s in range(0, flat.shape[0], 4096):
            out[s:s + 4096] = np.maximum((flat[s:s + 4096] @ self.A.T).max(axis=1), 0.0)
        return out.reshape(x.shape[:-1])


@dataclass(frozen=True, eq=False)
class NormSpec:
    """An evaluable norm on R^d: lp (p in {1,2,inf}), polytope gauge or dictionary max."""

    kind: str
    dim: int
    p: float = 2.0
    vertices: Optional[np.ndarray] = None
    functionals: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "lp":
            if self.p not in (1, 2, INF):
                raise PreconditionError("p must be 1, 2 or inf")
        elif self.kind == "polytope":
            v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
            if v.shape[1] != self.dim:
                v = v.reshape(-1, self.dim)
            sym = np.vstack([v, -v])
            object.__setattr__(self, "vertices", v)
            object.__setattr__(self, "_gauge", PolytopeGauge(sym))
        elif self.kind == "dictionary":
            w = np.atleast_2d(np.asarray(self.functionals, dtype=float)).reshape(-1, self.dim)
            if np.linalg.matrix_rank(w) < self.dim:
                raise PreconditionError("dictionary is not norming: functionals do not span")
            object.__setattr__(self, "functionals", w)
        else:
            raise PreconditionError(f"unknown norm kind {self.kind!r}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise PreconditionError(f"norm of dimension {self.dim} applied to {x.shape[-1]}-vector")
        if self.kind == "lp":
            if self.p == 1:
                return np.abs(x).sum(axis=-1)
            if self.p == 2:
                return np.sqrt((x * x).sum(axis=-1))
            return np.abs(x).max(axis=-1)
        if self.kind == "polytope":
            return self._gauge(x)
        return np.abs(x @ self.functionals.T).max(axis=-1)

    @property
    def polytopal(self) -> bool:
        return self.kind != "lp" or self.p != 2

    def to_json(self) -> dict:
        if self.kind == "lp":
            return {"kind": "lp", "p": "inf" if self.p == INF else int(self.p)}
        if self.kind == "polytope":
            return {"kind": "polytope", "vertices": self.vertices.tolist()}
        return {"kind": "dictionary", "functionals": self.functionals.tolist()}

    @staticmethod
    def from_json(spec: dict, dim: int) -> "NormSpec":
        kind = spec.get("kind")
        if kind == "lp":
            p = spec.get("p", 2)
            p = INF if p in ("inf", INF) else float(p)
            return NormSpec("lp", dim, p=p)
        if kind == "polytope":
            return NormSpec("polytope", dim, vertices=np.asarray(spec["vertices"], float))
        if kind == "dictionary":
            return NormSpec("dictionary", dim, functionals=np.asarray(spec["functionals"], float))
        raise PreconditionError(f"unknown norm kind {kind!r}")


def lp_norm(dim, p=2) -> NormSpec:
    return NormSpec("lp", dim, p=INF if p in ("inf", INF) else float(p))


def eval_norm(norm: NormSpec, x) -> float | np.ndarray:
    out = norm(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# pseudometrics


@dataclass
class PiecewiseLinear:
    """Nondecreasing piecewise-linear function through ``knots``; constant past the last knot."""

    t: np.ndarray
    v: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.t, self.v, left=0.0, right=float(self.v[-1]))

    def to_json(self) -> dict:
        return {"t": self.t.tolist(), "v": self.v.tolist()}


IDENTITY_VARPI = PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 1.0]))


class PseudometricSpec:
    """Pseudometric on the points of one support.

    ``norm``     -- d(x, y) = N(x - y)
    ``pullback`` -- d(x, y) = N'(F(x) - F(y)) with F tabulated on the support
    ``table``    -- explicit symmetric matrix
    """

    def __init__(self, kind, norm=None, values=None, target=None, table=None, varpi=None):
        self.kind = kind
        self.norm = norm
        self.varpi = varpi
        if kind == "norm":
            if norm is None:
                raise PreconditionError("norm-induced metric needs a norm")
            self.varpi = varpi or IDENTITY_VARPI
        elif kind == "pullback":
            vals = np.asarray(values, dtype=float)
            if vals.ndim == 1:
                vals = vals[:, None]
            if not np.all(np.isfinite(vals)):
                raise PreconditionError("pullback map must be finite")
            self.values = vals
            self.target = target or lp_norm(vals.shape[1], 2)
        elif kind == "table":
            t = np.asarray(table, dtype=float)
            if t.ndim != 2 or t.shape[0] != t.shape[1]:
                raise PreconditionError("table metric must be square")
            if not np.allclose(t, t.T) or np.any(t < 0) or np.any(np.abs(np.diag(t)) > 0):
                raise PreconditionError("table is not a pseudometric (symmetry/nonnegativity)")
            for k in range(t.shape[0]):
                if np.any(t > t[:, [k]] + t[[k], :] + 1e-12):
                    raise PreconditionError("table violates the triangle inequality")
            self.table = t
        else:
            raise PreconditionError(f"unknown metric kind {kind!r}")

    @property
    def translation_invariant(self) -> bool:
        return self.kind == "norm"

    def pairs(self, support: Support, i, j) -> np.ndarray:
        if self.kind == "norm":
            return self.norm(support.coords[i] - support.coords[j])
        if self.kind == "pullback":
            if self.values.shape[0] != support.n:
                raise PreconditionError("pullback map is not aligned with the support")
            diff = self.values[i] - self.values[j]
            if self.values.shape[1] == 1:
                return np.abs(diff[..., 0])
            return self.target(diff)
        if self.table.shape[0] != support.n:
            raise PreconditionError("table metric is not aligned with the support")
        return self.table[i, j]

    def offset_distance(self, support: Support, k) -> float:
        """Distance between lattice points differing by ``2k`` (norm metrics only)."""
        return float(self.norm(2.0 * support.unit * np.asarray(k, dtype=float)))

    def restrict(self, mask) -> "PseudometricSpec":
        mask = np.asarray(mask, dtype=bool)
        if self.kind == "norm":
            return self
        if self.kind == "pullback":
            return PseudometricSpec("pullback", values=self.values[mask], target=self.target,
                                    varpi=self.varpi)
        idx = np.flatnonzero(mask)
        return PseudometricSpec("table", table=self.table[np.ix_(idx, idx)], varpi=self.varpi)


def as_metric(metric, dim) -> PseudometricSpec:
    if metric is None:
        return PseudometricSpec("norm", norm=lp_norm(dim, 2))
    if isinstance(metric, NormSpec):
        return PseudometricSpec("norm", norm=metric)
    return metric


def pullback_metric(values, target=None) -> PseudometricSpec:
    return PseudometricSpec("pullback", values=values, target=target)


# ---------------------------------------------------------------------------
# midpoint pair enumeration


def half_offsets(ext) -> np.ndarray:
    """Nonzero lattice vectors ``k`` with ``2k`` fitting in the box, one of each ``+-k``."""
    ext = np.asarray(ext)
    rad = (ext - 1) // 2
    grids = np.indices(tuple(2 * rad + 1)).reshape(len(ext), -1).T - rad
    first = np.zeros(grids.shape[0], dtype=np.int64)
    for a in reversed(range(len(ext))):
        col = grids[:, a]
        first = np.where(col != 0, col, first)
    return grids[first > 0]


def _offset_slices(ext, k):
    lo, mid, hi = [], [], []
    for e, kk in zip(ext, k):
        r = abs(int(kk))
        mid.append(slice(r, e - r))
        lo.append(slice(r - kk, e - r - kk))
        hi.append(slice(r + kk, e - r + kk))
    return tuple(lo), tuple(mid), tuple(hi)


def iter_midpoint_triples(support: Support, metric=None, eps=None, mask=None, mid_mask=None,
                          block=1 << 20) -> Iterator[tuple]:
    """Yield index arrays ``(i, j, m)`` over unordered pairs ``i != j`` whose midpoint ``m``
    is a support point.

    Endpoints are restricted to ``mask``, midpoints to ``mid_mask`` (defaults to
    ``mask``) and, when ``eps`` is given, to pairs with ``metric(i, j) >= eps``.
    """
    metric = as_metric(metric, support.dim) if eps is not None else metric
    if mid_mask is None:
        mid_mask = mask
    buf = []
    size = 0

    def accept(i, j, m):
        keep = np.ones(i.shape[0], dtype=bool)
        if mask is not None:
            keep &= mask[i] & mask[j]
        if mid_mask is not None:
            keep &= mid_mask[m]
        return i[keep], j[keep], m[keep]

    def flush():
        nonlocal buf, size
        if buf:
            out = tuple(np.concatenate([b[c] for b in buf]) for c in range(3))
            buf, size = [], 0
            return out
        return None

    if support.dense:
        ext = tuple(int(e) for e in support.ext)
        offs = half_offsets(ext)
        if eps is not None and metric.translation_invariant and len(offs):
            dist = metric.norm(2.0 * support.unit * offs.astype(float))
            offs = offs[at_least(dist, eps)]
        pos = support.box_pos
        for k in offs:
            lo_s, mid_s, hi_s = _offset_slices(ext, k)
            pm, pl, ph = pos[mid_s].ravel(), pos[lo_s].ravel(), pos[hi_s].ravel()
            ok = (pm >= 0) & (pl >= 0) & (ph >= 0)
            if not ok.any():
                continue
            i, j, m = accept(pl[ok], ph[ok], pm[ok])
            if eps is not None and not metric.translation_invariant and i.size:
                keep = at_least(metric.pairs(support, i, j), eps)
                i, j, m = i[keep], j[keep], m[keep]
            if i.size:
                buf.append((i, j, m))
                size += i.size
                if size >= block:
                    yield flush()
    else:
        lat = support.lattice
        n = support.n
        rows = max(1, block // max(n, 1))
        for s in range(0, n, rows):
            ii = np.arange(s, min(n, s + rows))
            I = np.repeat(ii, n)
            J = np.tile(np.arange(n), ii.size)
            up = J > I
            I, J = I[up], J[up]
            tot = lat[I] + lat[J]
            even = np.all(tot % 2 == 0, axis=1)
            I, J, tot = I[even], J[even], tot[even]
            M = support.lookup(tot // 2)
            ok = M >= 0
            i, j, m = accept(I[ok], J[ok], M[ok])
            if eps is not None and i.size:
                keep = at_least(metric.pairs(support, i, j), eps)
                i, j, m = i[keep], j[keep], m[keep]
            if i.size:
                buf.append((i, j, m))
                size += i.size
                if size >= block:
                    yield flush()
    last = flush()
    if last is not None:
        yield last


def midpoint_pairs(support: Support, x) -> list:
    """All unordered pairs ``{y, z}`` of support points with ``(y + z) / 2 == x`` exactly."""
    m = support.locate(x)
    lat = support.lattice
    tot = 2 * lat[m] - lat
    partner = support.lookup(tot)
    idx = np.flatnonzero((partner >= 0) & (partner >= np.arange(support.n)))
    pts = support.coords
    return [(pts[i].tolist(), pts[partner[i]].tolist()) for i in idx]


# ---------------------------------------------------------------------------
# tabulated functions


class TabFunc:
    """Extended-real function given by values on a finite support (``+inf`` elsewhere)."""

    def __init__(self, support: Support, values, name: str = ""):
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.shape[0] != support.n:
            raise PreconditionError("values and support lengths differ")
        if np.any(np.isnan(vals)) or np.any(vals == -INF):
            raise PreconditionError("values must be finite or +inf")
        if not np.any(np.isfinite(vals)):
            raise PreconditionError("function is not proper: empty domain")
        vals.setflags(write=False)
        self.support = support
        self.values = vals
        self.name = name

    @property
    def dom(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def coords(self) -> np.ndarray:
        return self.support.coords

    @property
    def dim(self) -> int:
        return self.support.dim

    def __call__(self, point) -> float:
        if not self.support.contains(point):
            return INF
        return float(self.values[self.support.locate(point)])

    def with_values(self, values, name=None) -> "TabFunc":
        return TabFunc(self.support, values, self.name if name is None else name)

    def restrict(self, mask) -> "TabFunc":
        mask = np.asarray(mask, dtype=bool)
        return TabFunc(self.support.subset(mask), self.values[mask], self.name)

    def masked(self, mask) -> "TabFunc":
        """Same support, ``+inf`` off ``mask``."""
        return self.with_values(np.where(mask, self.values, INF))

    def inf(self) -> float:
        return float(self.values[self.dom].min())

    def sup(self) -> float:
        return float(self.values[self.dom].max())

    def to_json(self) -> dict:
        return {"domain": self.support.to_json(),
                "values": [v if math.isfinite(v) else "inf" for v in self.values.tolist()],
                "name": self.name}

    @staticmethod
    def from_json(spec: dict) -> "TabFunc":
        support = Support.from_json(spec["domain"])
        vals = [INF if v in ("inf", "Infinity", "+inf") else float(v) for v in spec["values"]]
        return TabFunc(support, vals, spec.get("name", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def tabulate(support, func, name="") -> TabFunc:
    """Tabulate a vectorized callable ``func(coords) -> values`` on a support."""
    if isinstance(support, DyadicGrid):
        support = support.support
    vals = np.asarray(func(support.coords), dtype=float).reshape(-1)
    return TabFunc(support, vals, name)


def values_on(f: TabFunc, idx) -> np.ndarray:
    return f.values[idx]


# ---------------------------------------------------------------------------
# modulus of uniform continuity


def _upper_concave_majorant(t, v) -> PiecewiseLinear:
    order = np.lexsort((-v, t))
    t, v = t[order], v[order]
    pts = [(0.0, 0.0)]
    for x, y in zip(t.tolist(), v.tolist()):
        if x == pts[-1][0]:
            if y > pts[-1][1]:
                pts[-1] = (x, y)
                while len(pts) >= 3 and _cross(pts[-3], pts[-2], pts[-1]) >= 0:
                    pts.pop(-2)
            continue
        pts.append((x, y))
        while len(pts) >= 3 and _cross(pts[-3], pts[-2], pts[-1]) >= 0:
            pts.pop(-2)
    tt = np.array([p[0] for p in pts])
    vv = np.maximum.accumulate(np.array([p[1] for p in pts]))
    if tt.size == 1:
        tt, vv = np.array([0.0, 1.0]), np.array([0.0, 0.0])
    return PiecewiseLinear(tt, vv)


def _cross(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def estimate_varpi(metric: PseudometricSpec, support: Support, norm: NormSpec) -> PiecewiseLinear:
    """Least concave nondecreasing piecewise-linear majorant of the scatter
    ``{(N(x - y), d(x, y))}`` over all support pairs, with value 0 at 0."""
    n = support.n
    best = {}
    rows = max(1, (1 << 20) // n)
    for s in range(0, n, rows):
        ii = np.arange(s, min(n, s + rows))
        I = np.repeat(ii, n)
        J = np.tile(np.arange(n), ii.size)
        up = J > I
        I, J = I[up], J[up]
        if I.size == 0:
            continue
        t = norm(support.coords[I] - support.coords[J])
        d = metric.pairs(support, I, J)
        key = np.round(t, 12)
        uk, inv = np.unique(key, return_inverse=True)
        mx = np.full(uk.size, -INF)
        np.maximum.at(mx, inv, d)
        for a, b in zip(uk.tolist(), mx.tolist()):
            if b > best.get(a, -INF):
                best[a] = b
    if not best:
        return PiecewiseLinear(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    t = np.array(list(best.keys()))
    v = np.array(list(best.values()))
    return _upper_concave_majorant(t, v)


def dual_norm(norm: NormSpec) -> NormSpec:
    """Dual norm ``sup{<w, x> : N(x) <= 1}`` for the supported norm kinds."""
    if norm.kind == "lp":
        p = {1.0: INF, 2.0: 2.0, INF: 1.0}[float(norm.p)]
        return NormSpec("lp", norm.dim, p=p)
    if norm.kind == "polytope":
        return NormSpec("dictionary", norm.dim, functionals=norm.vertices)
    return NormSpec("polytope", norm.dim, vertices=norm.functionals)


def set_diameter(support: Support, idx, metric) -> float:
    """Diameter of the points ``idx`` under ``metric`` (0 for fewer than two points)."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size < 2:
        return 0.0
    metric = as_metric(metric, support.dim)
    if metric.kind == "norm" and support.dim == 1:
        c = support.coords[idx, 0]
        return float(metric.norm(np.array([[c.max() - c.min()]]))[0])
    if metric.kind == "pullback" and metric.values.shape[1] == 1:
        v = metric.values[idx, 0]
        return float(v.max() - v.min())
    best = 0.0
    rows = max(1, (1 << 20) // idx.size)
    for s in range(0, idx.size, rows):
        a = idx[s:s + rows]
        I = np.repeat(a, idx.size)
        J = np.tile(idx, a.size)
        best = max(best, float(metric.pairs(support, I, J).max()))
    return best


def norm_rows(norm: NormSpec) -> np.ndarray | None:
    """Rows ``A`` with ``N(x) = max(A x)`` for polytopal norms; ``None`` for the Euclidean norm."""
    d = norm.dim
    if norm.kind == "lp":
        if norm.p == INF:
            return np.vstack([np.eye(d), -np.eye(d)])
        if norm.p == 1:
            signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
            return signs
        return None
    if norm.kind == "polytope":
        return norm._gauge.A
    return np.vstack([norm.functionals, -norm.functionals])

"""Norms built from sublevel sets of convex functions, and the tree-based renorming pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import (INF, NormSpec, TabFunc, as_metric, dual_norm, iter_midpoint_triples,
                     lp_norm)
from .envelope import hull_halfspaces, lower_planes
from .exceptions import PreconditionError
from .moduli import SampledModulus, is_midpoint_convex, norm_modulus, sphere_samples


def zeta_from_lambda(lam: float) -> float:
    """Squared-norm gap ``(sqrt(lam) - lam)**2 / 4`` guaranteed by the level construction."""
    return (math.sqrt(lam) - lam) ** 2 / 4.0


class LevelSetGauge:
    """Minkowski functional of a sublevel polytope ``{x : A x <= b}`` with ``b > 0``.

    The polytope is ``{h_hat <= r}`` for the piecewise-linear convex extension
    ``h_hat`` of the tabulated function, cut to the hull of its domain.
    """

    def __init__(self, level: float, A, b):
        self.level = float(level)
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any(b <= 0):
            raise PreconditionError(f"origin is not interior to the sublevel set at {level:g}")
        self.rows = A / b[:, None]
        self.dim = A.shape[1]

    @classmethod
    def from_planes(cls, level, S, c, HA, Hb):
        return cls(level, np.vstack([S, HA]), np.concatenate([level - c, Hb]))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.maximum((x @ self.rows.T).max(axis=-1), 0.0)

    def vertices(self) -> np.ndarray:
        """Extreme points of the unit ball ``{gauge <= 1}``."""
        if self.dim == 1:
            a = self.rows[:, 0]
            return np.array([[-1.0 / -a.min()], [1.0 / a.max()]])
        from scipy.spatial import ConvexHull, HalfspaceIntersection
        hs = np.column_stack([self.rows, -np.ones(len(self.rows))])
        pts = HalfspaceIntersection(hs, np.zeros(self.dim)).intersections
        return pts[ConvexHull(pts).vertices]

    def to_json(self) -> dict:
        return {"level": self.level, "rows": self.rows.tolist()}


@dataclass
class CompositeNorm:
    """``|||x|||^2 = base * N(x)^2 + sum_j w_j gauge_j(x)^2``."""

    gauges: list
    weights: np.ndarray
    dim: int
    zeta: float = 0.0
    lam: float = 1.0
    base_norm: Optional[NormSpec] = None
    base_weight: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def levels(self):
        return [g.level for g in self.gauges]

    def square(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        if self.base_norm is not None and self.base_weight > 0:
            out = out + self.base_weight * self.base_norm(x) ** 2
        for g, w in zip(self.gauges, self.weights):
            out = out + w * g(x) ** 2
        return out

    def __call__(self, x) -> np.ndarray:
        return np.sqrt(self.square(x))

    def equivalence(self, norm: NormSpec, count: int = 720) -> tuple:
        """``(a, b)`` with ``a N(x) <= |||x||| <= b N(x)`` on sampled directions."""
        u = sphere_samples(norm, count)
        r = self(u)
        return float(r.min()), float(r.max())

    def to_json(self) -> dict:
        return {"levels": self.levels, "weights": np.asarray(self.weights).tolist(),
                "zeta": self.zeta, "lambda": self.lam, "k": len(self.gauges),
                "base_weight": self.base_weight, **self.info}


# ---------------------------------------------------------------------------


def _symmetrize(f: TabFunc, mask, norm):
    neg = f.support.negation_index()
    if np.any(neg[mask] < 0):
        raise PreconditionError("the set must be symmetric about the origin")
    vals = f.values + f.values[np.maximum(neg, 0)] + norm(f.coords)
    vals = np.where(neg >= 0, vals, INF)
    return vals


def _lipschitz(coords, vals, norm):
    best = 0.0
    n = coords.shape[0]
    rows = max(1, (1 << 21) // max(n, 1))
    for s in range(0, n, rows):
        d = norm(coords[s:s + rows, None, :] - coords[None, :, :])
        dv = np.abs(vals[s:s + rows, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / d, 0.0)
        best = max(best, float(q.max()))
    return best


def _origin_interior(S) -> bool:
    """True when 0 is interior to the hull of the slope vectors ``S``."""
    if S.shape[1] == 1:
        return S.min() < 0 < S.max()
    from scipy.spatial import ConvexHull, QhullError
    try:
        hull = ConvexHull(S)
    except QhullError:
        return False
    return bool(np.all(hull.equations[:, -1] < -1e-12))


def _partition(m, M, ratio):
    """Coarsest geometric levels ``m = a_1 < ... < a_k = M`` with ``a_j / a_{j+1} >= ratio``."""
    if M <= m:
        return np.array([m])
    levels = [m]
    while levels[-1] < M * (1 - 1e-12):
        levels.append(min(M, levels[-1] / ratio))
    return np.array(levels)


def renorm_from_function(f: TabFunc, C=None, delta: float = 0.1, norm: Optional[NormSpec] = None,
                         levels: str = "grid", max_rounds: int = 40) -> CompositeNorm:
    """Composite level-set norm with ``Delta_{|||.|||^2} < zeta  =>  Delta_f < delta`` on ``C``.

    ``f`` is replaced by ``f(x) + f(-x) + N(x)`` shifted to minimum 0.

    ``levels="grid"`` puts one level at every distinct value ``>= delta / 2`` taken on
    the support, so each point lies on the boundary of its own level set, and
    ``lambda`` is the certified ratio ``max gauge_r(x)`` over ``f(x) <= r - delta``.
    ``levels="geometric"`` uses levels from ``delta / 2`` growing by ``lambda**-1/2``
    with ``lambda`` at least the Lipschitz estimate ``(1 + eta / N_C)**-1``.
    """
    if levels not in ("grid", "geometric"):
        raise PreconditionError(f"unknown level scheme {levels!r}")
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    norm = norm or lp_norm(f.dim, 2)
    mask = f.dom.copy() if C is None else (np.asarray(C, bool) & f.dom)
    if not mask.any():
        raise PreconditionError("C does not meet dom(f)")
    if np.any(f.values[mask] < -1e-12):
        raise PreconditionError("f must be nonnegative on C")
    if not is_midpoint_convex(f.restrict(mask)):
        raise PreconditionError("f must be convex on C")
    h = _symmetrize(f, mask, norm)
    X = f.coords[mask]
    hv = h[mask]
    hv = hv - hv.min()
    S, c = lower_planes(X, hv)
    if _origin_interior(S):
        # the max-of-planes extension has bounded sublevel sets on the whole space
        HA, Hb = np.zeros((0, f.dim)), np.zeros(0)
    else:
        HA, Hb = hull_halfspaces(X)
    # work with the piecewise-linear extension so the level sets are true polytopes
    hv = (X @ S.T + c).max(axis=1)
    L = float(dual_norm(norm)(S).max())
    if not math.isfinite(L) or L <= 0:
        raise PreconditionError("f is not Lipschitz-boundable on C")
    NC = float(norm(X).max())
    eta = delta / L
    lam_lip = 1.0 / (1.0 + eta / NC)
    m, M = delta / 2.0, float(hv.max())
    if np.any(c >= m):
        raise PreconditionError("the symmetrized function must attain its minimum at the origin")
    if levels == "grid":
        lv = np.unique(np.round(hv[hv >= m], 12))
        gauges = [LevelSetGauge.from_planes(a, S, c, HA, Hb) for a in lv]
        inner = 0.0
        outer = INF
        for a, g in zip(lv, gauges):
            low = hv <= a - delta + 1e-12
            if low.any():
                inner = max(inner, float(g(X[low]).max()))
            on = np.abs(hv - a) <= 1e-12
            outer = min(outer, float(g(X[on]).min()))
        # any lambda above the certified ratio is valid; (sqrt(l) - l) peaks at l = 1/4
        lam = max(inner, 0.25)
        if lam >= 1.0:
            raise PreconditionError("level sets are not strictly nested; delta too small")
        ratio = None
    else:
        lam = lam_lip
        ratio = math.sqrt(lam)
        for _ in range(max_rounds):
            lv = _partition(m, M, ratio)
            gauges = [LevelSetGauge.from_planes(a, S, c, HA, Hb) for a in lv]
            inner = 0.0
            outer = INF
            for j, (a, g) in enumerate(zip(lv, gauges)):
                low = hv <= a - delta + 1e-12
                if low.any():
                    inner = max(inner, float(g(X[low]).max()))
                if j > 0:
                    above = hv > lv[j - 1] + 1e-12
                    if above.any():
                        outer = min(outer, float(g(X[above]).min()))
            new_lam = max(lam_lip, inner)
            if new_lam >= 1.0:
                raise PreconditionError("level sets are not strictly nested; delta too small")
            if new_lam > lam + 1e-15:
                lam = new_lam
                ratio = max(ratio, math.sqrt(lam))
                continue
            if outer < math.sqrt(lam) - 1e-12:
                # points above a level sit too deep inside the next set: refine the levels
                ratio = 0.5 * (1.0 + ratio)
                continue
            break
        else:
            raise PreconditionError("level construction did not stabilise")
    zeta = zeta_from_lambda(lam)
    info = {"lambda_lipschitz": lam_lip, "lambda_certified": inner, "outer_min": outer,
            "lipschitz": L, "eta": eta, "radius": NC, "delta": delta, "ratio": ratio,
            "scheme": levels}
    return CompositeNorm(gauges, np.ones(len(gauges)), f.dim, zeta, lam, info=info)


def implication_scan(f: TabFunc, cnorm, zeta: float, delta: float, C=None) -> dict:
    """Scan representable pairs of ``C``: ``Delta_{|||.|||^2} < zeta`` must force ``Delta_f < delta``."""
    mask = f.dom.copy() if C is None else (np.asarray(C, bool) & f.dom)
    sq = cnorm.square(f.coords)
    v = f.values
    bad, count, worst = 0, 0, INF
    for i, j, m in iter_midpoint_triples(f.support, mask=mask):
        gn = 0.5 * (sq[i] + sq[j]) - sq[m]
        gf = 0.5 * (v[i] + v[j]) - v[m]
        hit = gf >= delta
        count += int(hit.sum())
        if hit.any():
            worst = min(worst, float(gn[hit].min()))
            bad += int((gn[hit] < zeta * (1 - 1e-9)).sum())
    return {"holds": bad == 0, "violations": bad, "pairs_with_large_gap": count,
            "min_norm_gap_on_those": worst, "zeta": zeta}


def renorm_global(f: TabFunc, norm: Optional[NormSpec] = None, alpha: float = 1.0,
                  eps: float = 1.0, max_levels: Optional[int] = None) -> CompositeNorm:
    """``|||x|||^2 = N(x)^2 + alpha sum_n c_n |||x|||_n^2`` over sublevel sets ``{f <= n}``.

    ``|||.|||_n`` is the level-set norm for ``f`` on ``{f <= n}`` with ``delta = delta_f(eps)``
    and ``c_n = 2**-n / sup_{N(u)=1} |||u|||_n^2``; smaller ``alpha`` keeps the result closer
    to ``N``.
    """
    from .moduli import delta_modulus

    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    norm = norm or lp_norm(f.dim, 2)
    delta = delta_modulus(f, eps, norm).delta
    if not (delta > 0 and math.isfinite(delta)):
        raise PreconditionError("f must be eps-uniformly convex with a finite positive modulus")
    shift = f.inf()
    top = f.sup() - shift
    count = max(1, math.ceil(top)) if max_levels is None else max_levels
    gauges, weights, parts = [], [], []
    for n in range(1, count + 1):
        C = f.dom & (f.values - shift <= n * top / count + 1e-12)
        sub = renorm_from_function(f.with_values(f.values - shift), C, delta, norm)
        u = sphere_samples(norm)
        c = 2.0 ** -n / float(sub.square(u).max())
        for g in sub.gauges:
            gauges.append(g)
            weights.append(alpha * c)
        parts.append({"level": n * top / count, "k": len(sub.gauges), "zeta": sub.zeta,
                      "weight": alpha * c})
    out = CompositeNorm(gauges, np.array(weights), f.dim, base_norm=norm, base_weight=1.0,
                        info={"alpha": alpha, "delta": delta, "parts": parts})
    lo, hi = out.equivalence(norm)
    out.info["sphere_range"] = [lo, hi]
    out.info["sup_distance_to_base"] = max(abs(lo - 1.0), abs(hi - 1.0))
    return out


# ---------------------------------------------------------------------------


def _eps_weight(eps: float, position: int) -> float:
    n = round(1.0 / eps)
    if n >= 1 and abs(n * eps - 1.0) < 1e-12:
        return 2.0 ** -n
    return 2.0 ** -position


def enflo_pipeline(norm: NormSpec, grid, eps_list, cap: int = 64, samples: int = 720) -> dict:
    """Tree heights -> ``3**-h`` -> convex envelope -> ``F = N + sum 2**-n f_n`` -> ball ``B``.

    ``f_n`` is built at ``eps = 1/n`` (weight ``2**-n``); other scales use their position.
    The final norm is the gauge of ``B = {F <= inf F + 1/2}`` for the piecewise-linear
    convex extension of ``F``.
    """
    from .envelope import convex_envelope
    from .transforms import exp_transform
    from .trees import height_function

    support = grid.support if hasattr(grid, "support") else grid
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise PreconditionError("need at least one scale")
    step = support.unit
    if any(e < 2 * step * (1 - 1e-12) for e in eps_list):
        raise PreconditionError("every eps must be at least twice the grid spacing")
    ball = norm(support.coords) <= 1 + 1e-12
    body = support.subset(ball)
    metric = as_metric(norm, support.dim)
    F = norm(body.coords)
    stages = []
    for pos, e in enumerate(eps_list, start=1):
        h = height_function(body, e, metric, cap)
        g = exp_transform(h, 1.0)
        fn = convex_envelope(g)
        w = _eps_weight(e, pos)
        F = F + w * fn.values
        stages.append({"eps": e, "weight": w, "max_height": int(-h.inf()),
                       "height_at_0": int(-h(np.zeros(support.dim))) if body.contains(
                           np.zeros(support.dim)) else None,
                       "f_at_0": float(fn(np.zeros(support.dim)))})
    Ff = TabFunc(body, F, "F")
    inf_F = float(F.min())
    B = F <= inf_F + 0.5 + 1e-12
    # the ball is the sublevel set of the piecewise-linear extension of F
    S, c = lower_planes(body.coords, F)
    HA, Hb = hull_halfspaces(body.coords)
    final = LevelSetGauge.from_planes(inf_F + 0.5, S, c, HA, Hb)
    neg = body.negation_index()
    sym = float(np.max(np.abs(F - F[neg]))) if np.all(neg >= 0) else INF
    nx = norm(body.coords)
    origin = int(np.argmin(nx))
    radii = sorted({float(r) for r in np.linspace(0.125, 1.0, 8)})
    margin = [(r, float((F[nx >= r - 1e-12] - F[origin]).min())) for r in radii]
    sphere = nx >= 1 - 1e-12
    return {"F": Ff, "ball": B, "final_norm": final, "stages": stages,
            "F0": float(F[origin]), "inf_F": inf_F, "symmetry_error": sym,
            "F_min_on_sphere": float(F[sphere].min()) if sphere.any() else None,
            "F_minus_norm_min": float((F - nx).min()),
            "strong_minimum_margin": margin,
            "input_modulus": {e: norm_modulus(norm, e, samples) for e in eps_list},
            "output_modulus": {e: norm_modulus(final, e, samples) for e in eps_list}}



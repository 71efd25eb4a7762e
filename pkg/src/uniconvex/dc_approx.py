"""Approximation by differences of convex functions via a quadratic-gap kernel.

For a norm ``|||.|||`` with the implication ``Delta_{|||.|||^2} < zeta => |f(x) - f(y)| <= eps``
the infimal convolution

    g(x) = min_y f(y) + c Delta_{|||.|||^2}(x, y),   c = 2 M / zeta,

is within ``eps`` of ``f`` and splits as ``u - v`` with ``u = (c/2)|||x|||^2`` and
``v(x) = max_y c|||(x+y)/2|||^2 - (c/2)|||y|||^2 - f(y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Support, TabFunc, lp_norm, pullback_metric
from .exceptions import CapExceeded, PreconditionError
from .moduli import midpoint_convexity_defect


@dataclass
class DCDecomp:
    u: TabFunc
    v: TabFunc
    c: float
    info: dict = field(default_factory=dict)

    @property
    def g(self) -> TabFunc:
        return self.u.with_values(self.u.values - self.v.values, name="g")

    def convexity(self) -> dict:
        return {"u_defect": midpoint_convexity_defect(self.u),
                "v_defect": midpoint_convexity_defect(self.v)}

    def to_json(self) -> dict:
        return {"c": self.c, "u": self.u.to_json(), "v": self.v.to_json(), **self.info}


def dc_error_report(f: TabFunc, g: TabFunc, C=None) -> float:
    """``max |f - g|`` over ``C`` (default: the common domain)."""
    mask = f.dom & g.dom if C is None else np.asarray(C, bool) & f.dom & g.dom
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(f.values[mask] - g.values[mask])))


def _kernel_parts(X, Y, fy, cnorm, c, block=1 << 20):
    """Per-row ``min_y f(y) + c Delta`` and ``max_y c|||mid|||^2 - c/2 |||y|||^2 - f(y)``."""
    sx = cnorm.square(X)
    sy = cnorm.square(Y)
    inner = np.empty(X.shape[0])
    arg = np.empty(X.shape[0], dtype=np.int64)
    rows = max(1, block // max(Y.shape[0], 1))
    for s in range(0, X.shape[0], rows):
        mid = 0.5 * (X[s:s + rows, None, :] + Y[None, :, :])
        t = c * cnorm.square(mid) - 0.5 * c * sy[None, :] - fy[None, :]
        k = np.argmax(t, axis=1)
        arg[s:s + rows] = k
        inner[s:s + rows] = t[np.arange(t.shape[0]), k]
    return 0.5 * c * sx, inner, arg


def cepedello_approx(f: TabFunc, C=None, eps: float = 0.2, dictionary=None, cap: int = 64,
                     norm=None, mode: str = "prose"):
    """DC approximation of ``f`` on ``C`` within ``eps``; returns ``(g, DCDecomp, err)``.

    Steps: a convex ``Phi`` with ``Delta_Phi <= delta => |f(x) - f(y)| <= eps`` from the
    half-derivation of the pullback pseudometric ``|f(x) - f(y)|``; a level-set norm
    with ``Delta_{|||.|||^2} < zeta => Delta_Phi < delta``; then the kernel convolution.
    """
    from .dentability import uc_function_from_derivation
    from .renorming import renorm_from_function
    from .transforms import lipschitz_regularization

    if not eps > 0:
        raise PreconditionError("eps must be positive")
    s = f.support
    norm = norm or lp_norm(s.dim, 2)
    mask = f.dom.copy() if C is None else np.asarray(C, bool) & f.dom
    if not mask.any():
        raise PreconditionError("C does not meet dom(f)")
    fv = f.values[mask]
    M = float(fv.max() - fv.min())
    sub = s.subset(mask)
    X = sub.coords
    if M == 0.0:
        zero = TabFunc(sub, np.zeros(sub.n), "u")
        dc = DCDecomp(zero, TabFunc(sub, -fv, "v"), 0.0, {"M": 0.0})
        g = dc.g
        return g, dc, dc_error_report(TabFunc(sub, fv), g)
    metric = pullback_metric(np.where(mask, f.values, 0.0))
    try:
        phi, delta = uc_function_from_derivation(s, mask, eps, dictionary, metric, cap, mode)
    except CapExceeded:
        raise CapExceeded("not finitely dentable at requested scale", where="dent") from None
    if not (delta > 0 and math.isfinite(delta)):
        # no pair is eps-far in the pullback metric: any delta works
        delta = 1.0
    # on a finite support a regularisation radius below the grid unit leaves phi unchanged
    osc = float(phi.sup() - phi.inf())
    lip = lipschitz_regularization(phi, None, max(osc, 1e-12) / (0.5 * s.unit), norm)
    # the level-set norm is built around the centre of the bounding box
    x0 = 0.5 * (X.min(axis=0) + X.max(axis=0))
    centred = Support(sub.lattice, sub.origin - x0, sub.unit)
    phi = TabFunc(centred, lip.values - lip.inf(), "phi")
    cnorm = renorm_from_function(phi, None, delta, norm)
    zeta = cnorm.zeta
    c = 2.0 * M / zeta
    u, v, arg = _kernel_parts(X - x0, X - x0, fv, cnorm, c)
    dc = DCDecomp(TabFunc(sub, u, "u"), TabFunc(sub, v, "v"), c,
                  {"M": M, "zeta": zeta, "delta": delta, "eps": eps, "levels": len(cnorm.gauges),
                   "lambda": cnorm.lam, "centre": x0.tolist()})
    g = dc.g
    fsub = TabFunc(sub, fv, f.name)
    err = dc_error_report(fsub, g)
    dc.info["error"] = err
    dc.info["waypoints"] = waypoint_check(TabFunc(centred, fv), cnorm, c, eps)
    return g, dc, err


def waypoint_check(f: TabFunc, cnorm, c: float, eps: float, block=1 << 20) -> dict:
    """For every ``y`` with ``f(y) + c Delta(x, y) <= f(x)``: ``0 <= f(x) - f(y) <= eps``."""
    X = f.coords
    fv = f.values
    sq = cnorm.square(X)
    worst_lo, worst_hi, count = 0.0, 0.0, 0
    rows = max(1, block // max(X.shape[0], 1))
    for s in range(0, X.shape[0], rows):
        mid = 0.5 * (X[s:s + rows, None, :] + X[None, :, :])
        gap = 0.5 * (sq[s:s + rows, None] + sq[None, :]) - cnorm.square(mid)
        diff = fv[s:s + rows, None] - fv[None, :]
        inA = fv[None, :] + c * gap <= fv[s:s + rows, None]
        count += int(inA.sum())
        if inA.any():
            worst_lo = min(worst_lo, float(diff[inA].min()))
            worst_hi = max(worst_hi, float(diff[inA].max()))
    return {"holds": worst_lo >= -1e-12 and worst_hi <= eps + 1e-12, "pairs": count,
            "min_drop": worst_lo, "max_drop": worst_hi}


# ---------------------------------------------------------------------------
# the two thresholds


def _bisect(ok, hi, steps):
    """Bracket ``[lo, hi]`` of ``inf{e : ok(e)}`` assuming ``ok`` is monotone and ``ok(hi)``."""
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def dentability_threshold(f: TabFunc, C=None, dictionary=None, cap: int = 64,
                          steps: int = 4) -> tuple:
    """Bracket of the least ``eps`` with ``Dz(f, eps)`` finite within ``cap``."""
    from .dentability import CAP_EXCEEDED, dz_index

    mask = f.dom.copy() if C is None else np.asarray(C, bool) & f.dom
    metric = pullback_metric(np.where(mask, f.values, 0.0))
    osc = float(np.ptp(f.values[mask]))
    if osc == 0.0:
        return 0.0, 0.0

    def ok(e):
        return e > 0 and dz_index(f.support, mask, e, dictionary, metric, cap).dz != CAP_EXCEEDED

    return _bisect(ok, osc * (1 + 1e-9), steps)


def approximation_threshold(f: TabFunc, C=None, dictionary=None, cap: int = 64,
                            steps: int = 4) -> dict:
    """Bracket of the least ``eps`` at which the kernel pipeline succeeds, and the best error."""
    mask = f.dom.copy() if C is None else np.asarray(C, bool) & f.dom
    osc = float(np.ptp(f.values[mask]))
    if osc == 0.0:
        return {"bracket": (0.0, 0.0), "best_error": 0.0}
    errors = []

    def ok(e):
        if e <= 0:
            return False
        try:
            _, _, err = cepedello_approx(f, mask, e, dictionary, cap)
        except (CapExceeded, PreconditionError):
            return False
        errors.append(err)
        return err <= e + 1e-6

    lo, hi = _bisect(ok, osc * (1 + 1e-9), steps)
    if not errors:
        ok(hi)
    return {"bracket": (lo, hi), "best_error": min(errors) if errors else None}


def dc_bounds_check(f: TabFunc, C=None, eps1=None, eps2=None, dictionary=None, cap: int = 64,
                    steps: int = 4, tol: float = 1e-9) -> dict:
    """Check ``eps1 / 2 <= eps2 <= 2 eps1`` on brackets.

    ``eps1`` and ``eps2`` are ``(lo, hi)`` brackets, computed by bisection when omitted.
    ``eps2`` runs from the best achieved error to the pipeline's own threshold.  The
    sandwich holds when some pair of bracketed values satisfies it.
    """
    if eps1 is None:
        eps1 = dentability_threshold(f, C, dictionary, cap, steps)
    if eps2 is None:
        res = approximation_threshold(f, C, dictionary, cap, steps)
        best = res["best_error"]
        eps2 = (min(best, res["bracket"][1]) if best is not None else res["bracket"][0],
                res["bracket"][1])
    a1, b1 = (float(e) for e in eps1)
    a2, b2 = (float(e) for e in eps2)
    upper = a2 <= 2 * b1 + tol
    lower = a1 / 2 <= b2 + tol
    return {"holds": upper and lower, "eps1": [a1, b1], "eps2": [a2, b2],
            "upper": upper, "lower": lower}

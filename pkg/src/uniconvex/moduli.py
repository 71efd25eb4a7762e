"""Moduli of uniform convexity on finite supports.

The two-point gap of ``f`` at ``(x, y)`` is ``(f(x) + f(y)) / 2 - f((x + y) / 2)``.
All infima run over pairs of ``dom(f)`` whose midpoint is again a point of
``dom(f)``; pairs with an off-domain midpoint are skipped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import (INF, NormSpec, PseudometricSpec, TabFunc, as_metric, at_least, dual_norm,
                     iter_midpoint_triples, lp_norm)
from .exceptions import PreconditionError

CONVEXITY_TOL = 1e-9


@dataclass
class ModulusReport:
    epsilon: float
    delta: float
    witness: Optional[tuple]
    pair_count: int
    kind: str = "convex"

    def to_json(self) -> dict:
        return {"kind": self.kind, "epsilon": self.epsilon,
                "delta": self.delta if math.isfinite(self.delta) else "inf",
                "witness": None if self.witness is None else [list(p) for p in self.witness],
                "pair_count": self.pair_count}


def _check_eps(eps):
    if not (eps > 0):
        raise PreconditionError("eps must be positive")


def _scan(f: TabFunc, eps, metric, quasi=False):
    dom = f.dom
    v = f.values
    best, arg, count = INF, None, 0
    for i, j, m in iter_midpoint_triples(f.support, metric, eps, mask=dom):
        if quasi:
            gap = np.maximum(v[i], v[j]) - v[m]
        else:
            gap = 0.5 * (v[i] + v[j]) - v[m]
        count += gap.size
        k = int(np.argmin(gap))
        if gap[k] < best:
            best, arg = float(gap[k]), (int(i[k]), int(j[k]))
    return best, arg, count


def _report(f, eps, metric, quasi):
    if eps is not None:
        _check_eps(eps)
    best, arg, count = _scan(f, eps, as_metric(metric, f.dim), quasi)
    witness = None
    if arg is not None:
        c = f.coords
        witness = (tuple(c[arg[0]].tolist()), tuple(c[arg[1]].tolist()))
    return ModulusReport(float(eps) if eps is not None else 0.0, best, witness, count,
                         "quasi" if quasi else "convex")


def delta_modulus(f: TabFunc, eps: float, metric=None) -> ModulusReport:
    """Infimum of the midpoint gap over pairs at distance at least ``eps``.

    ``metric`` is a :class:`NormSpec`, a :class:`PseudometricSpec` or ``None`` (Euclidean).
    """
    return _report(f, eps, metric, quasi=False)


def quasi_modulus(f: TabFunc, eps: float, metric=None) -> ModulusReport:
    """Like :func:`delta_modulus` with gap ``max(f(x), f(y)) - f(mid)``."""
    return _report(f, eps, metric, quasi=True)


def midpoint_convexity_defect(f: TabFunc) -> float:
    """Smallest midpoint gap over all pairs (``inf`` if there are none)."""
    return _scan(f, None, None)[0]


def is_midpoint_convex(f: TabFunc, tol: float = CONVEXITY_TOL) -> bool:
    return midpoint_convexity_defect(f) >= -tol


def delta_phi(phi: TabFunc, x, y) -> float:
    """Two-point gap of ``phi`` at ``x`` and ``y``."""
    s = phi.support
    i, j = s.locate(x), s.locate(y)
    tot = s.lattice[i] + s.lattice[j]
    if np.any(tot % 2):
        raise PreconditionError("midpoint is not a support point")
    m = int(s.lookup(tot // 2))
    if m < 0:
        raise PreconditionError("midpoint is not a support point")
    v = phi.values
    if not (math.isfinite(v[i]) and math.isfinite(v[j])):
        return INF
    if not math.isfinite(v[m]):
        raise PreconditionError("midpoint lies outside dom")
    return float(0.5 * (v[i] + v[j]) - v[m])


# ---------------------------------------------------------------------------
# gage and t-interpolation


def _iter_t_gaps(f: TabFunc, eps, metric):
    """Yield matching ``(t, gap)`` arrays for all pairs of the modulus pair set and every
    interior lattice point ``(1 - t) x + t y`` of the segment lying in ``dom(f)``."""
    s = f.support
    dom = f.dom
    v = f.values
    lat = s.lattice
    for i, j, _ in iter_midpoint_triples(s, metric, eps, mask=dom):
        diff = lat[j] - lat[i]
        g = np.gcd.reduce(np.abs(diff), axis=1)
        for gv in np.unique(g):
            if gv < 2:
                continue
            sel = g == gv
            ii, jj = i[sel], j[sel]
            step = diff[sel] // gv
            k = np.arange(1, int(gv))
            p = s.lookup((lat[ii][:, None, :] + k[None, :, None] * step[:, None, :])
                         .reshape(-1, s.dim)).reshape(ii.size, k.size)
            ok = p >= 0
            ok[ok] = dom[p[ok]]
            if not ok.any():
                continue
            t = np.broadcast_to(k / gv, ok.shape)[ok]
            rows = np.nonzero(ok)[0]
            gap = (1 - t) * v[ii[rows]] + t * v[jj[rows]] - v[p[ok]]
            yield t, gap


def gage(f: TabFunc, eps: float, norm=None, check=True) -> float:
    """Gage ``inf ((1-t) f(x) + t f(y) - f((1-t) x + t y)) / (t (1 - t))``."""
    _check_eps(eps)
    if check and not is_midpoint_convex(f):
        raise PreconditionError("gage needs a midpoint-convex function")
    metric = as_metric(norm, f.dim)
    best = INF
    for t, gap in _iter_t_gaps(f, eps, metric):
        best = min(best, float((gap / (t * (1 - t))).min()))
    return float(best)


def check_t_interpolation(f: TabFunc, eps: float, norm=None, tol: float = CONVEXITY_TOL) -> dict:
    """Check ``gap_t >= 2 delta_f(eps) min(t, 1 - t)`` on every representable triple."""
    _check_eps(eps)
    metric = as_metric(norm, f.dim)
    delta = delta_modulus(f, eps, metric).delta
    worst, count = INF, 0
    if math.isfinite(delta):
        for t, gap in _iter_t_gaps(f, eps, metric):
            slack = gap - 2 * delta * np.minimum(t, 1 - t)
            worst = min(worst, float(slack.min()))
            count += gap.size
    return {"holds": bool(worst >= -tol), "worst_slack": worst, "delta": delta,
            "triple_count": count}


def check_gage_scaling(f: TabFunc, eps: float, lambdas, norm=None,
                       tol: float = CONVEXITY_TOL) -> dict:
    """Check ``p_f(lam * eps) >= lam**2 * p_f(eps)`` for each ``lam >= 1``."""
    _check_eps(eps)
    if any(lam < 1 for lam in lambdas):
        raise PreconditionError("scaling factors must be >= 1")
    base = gage(f, eps, norm)
    rows = []
    for lam in lambdas:
        p = gage(f, lam * eps, norm, check=False)
        if not math.isfinite(p) or not math.isfinite(base):
            ok, slack = True, INF
        else:
            slack = p - lam * lam * base
            ok = slack >= -tol * max(1.0, abs(p))
        rows.append({"lambda": lam, "gage": p, "bound": lam * lam * base, "slack": slack,
                     "holds": bool(ok)})
    return {"holds": all(r["holds"] for r in rows), "base_gage": base, "rows": rows}


# ---------------------------------------------------------------------------
# global behaviour


def coercivity_profile(f: TabFunc, norm: Optional[NormSpec], radii) -> list:
    """For each ``r``, the minimum of ``f(x) / N(x)**2`` over ``x`` in ``dom(f)`` with ``N(x) >= r``."""
    norm = norm or lp_norm(f.dim, 2)
    nx = norm(f.coords)
    dom = f.dom
    top = float(nx[dom].max())
    out = []
    for r in radii:
        if r <= 0:
            raise PreconditionError("radii must be positive")
        if r > top * (1 + 1e-12):
            raise PreconditionError(f"radius {r} exceeds the support extent {top}")
        sel = dom & at_least(nx, r)
        out.append((float(r), float((f.values[sel] / nx[sel] ** 2).min())))
    return out


def _argmin(values):
    return int(np.argmin(values))


def stability_eta(f: TabFunc, eps_prime: float, x0star=None, norm=None) -> dict:
    """The ``(delta, R, eta)`` recipe guaranteeing minimizer stability at scale ``eps_prime``.

    ``delta`` is the envelope modulus of ``f + x0*`` at ``eps_prime``, ``x0`` an exact
    minimizer, ``R`` the support diameter and ``eta = delta / R``.
    """
    from .envelope import convex_envelope

    norm = norm or lp_norm(f.dim, 2)
    x0star = np.zeros(f.dim) if x0star is None else np.asarray(x0star, float).reshape(-1)
    tilted = f.with_values(f.values + f.coords @ x0star)
    env = convex_envelope(tilted)
    delta = delta_modulus(env, eps_prime, norm).delta
    coords = f.coords[f.dom]
    R = float(norm(coords[:, None, :] - coords[None, :, :]).max()) if coords.shape[0] < 3000 \
        else 2 * float(norm(coords - coords.mean(axis=0)).max())
    R = max(R, 1e-300)
    eta = delta / R if math.isfinite(delta) else INF
    return {"delta": delta, "R": R, "eta": eta}


def minimizer_stability_probe(f: TabFunc, x0star, eta: float, trials: int, seed: int,
                              eps_prime: Optional[float] = None, norm=None) -> dict:
    """Distances between the minimizer of ``f + x0*`` and minimizers of randomly
    perturbed ``f + x*`` with ``||x* - x0*||_* < eta``."""
    norm = norm or lp_norm(f.dim, 2)
    dnorm = dual_norm(norm)
    x0star = np.zeros(f.dim) if x0star is None else np.asarray(x0star, float).reshape(-1)
    if not math.isfinite(eta):
        eta = 1.0
    rng = np.random.default_rng(seed)
    dom = np.flatnonzero(f.dom)
    c = f.coords[dom]
    v = f.values[dom]
    k0 = _argmin(v + c @ x0star)
    x0 = c[k0]
    dists, samples = [], []
    for _ in range(int(trials)):
        w = rng.standard_normal(f.dim)
        nw = float(dnorm(w))
        r = eta * rng.random() ** (1.0 / f.dim)
        xs = x0star + (w / nw * r if nw > 0 else 0.0)
        k = _argmin(v + c @ xs)
        dists.append(float(norm(c[k] - x0)))
        samples.append(c[k].tolist())
    mx = max(dists) if dists else 0.0
    out = {"x0": x0.tolist(), "eta": eta, "trials": int(trials), "max_distance": mx,
           "distances": dists, "minimizers": samples}
    if eps_prime is not None:
        out["eps_prime"] = eps_prime
        out["within"] = bool(mx <= eps_prime * (1 + 1e-12))
    return out


# ---------------------------------------------------------------------------
# modulus of convexity of a norm


def sphere_samples(norm, count: int = 720, seed: int = 0) -> np.ndarray:
    """Points on the unit sphere of ``norm`` along evenly spread directions.

    ``seed`` rotates the deterministic sample set.
    """
    shift = (seed * 0.6180339887498949) % 1.0
    if norm.dim == 1:
        u = np.array([[1.0], [-1.0]])
    elif norm.dim == 2:
        th = 2 * np.pi * (np.arange(count) + shift) / count
        u = np.column_stack([np.cos(th), np.sin(th)])
    else:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5 ** 0.5) * k + 2 * np.pi * shift
        u = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        u = np.vstack([u, np.eye(3), -np.eye(3)])
    return u / norm(u)[:, None]


class SampledModulus:
    """``t -> inf{1 - N((x + y) / 2) : x, y sampled on the sphere, N(x - y) >= t}``."""

    def __init__(self, norm, count: int = 720, seed: int = 0):
        pts = sphere_samples(norm, count, seed)
        dist, gap = [], []
        n = pts.shape[0]
        rows = max(1, (1 << 20) // n)
        for s in range(0, n, rows):
            a = pts[s:s + rows]
            diff = a[:, None, :] - pts[None, :, :]
            mid = 0.5 * (a[:, None, :] + pts[None, :, :])
            dist.append(norm(diff).ravel())
            gap.append((1.0 - norm(mid)).ravel())
        dist = np.concatenate(dist)
        gap = np.concatenate(gap)
        order = np.argsort(-dist, kind="stable")
        self.dist = dist[order]
        self.suffix = np.minimum.accumulate(gap[order])

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(-self.dist, -t * (1 - 1e-12), side="right"))
        if k == 0:
            return INF
        return float(max(self.suffix[k - 1], 0.0))


def l2_modulus(t: float) -> float:
    """Exact modulus of convexity of a Euclidean space."""
    t = min(float(t), 2.0)
    return 1.0 - math.sqrt(max(0.0, 1.0 - t * t / 4.0))


def norm_modulus(norm, eps: float, samples: int = 720, seed: int = 0) -> float:
    """Sampled modulus of convexity of ``norm`` (any callable norm with ``dim``) at ``eps``."""
    if eps < 0 or eps > 2:
        raise PreconditionError("eps must lie in [0, 2]")
    if eps == 0:
        return 0.0
    return SampledModulus(norm, samples, seed)(eps)

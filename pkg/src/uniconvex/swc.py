"""Threshold measures of non-compactness for finite convex bodies.

Each measure is the least ``eps`` at which some quantity stays bounded:

* ``mu1``: length of sequences whose splits have ``eps``-apart hulls,
* ``mu2``: height of ``eps``-separated dyadic trees,
* ``mu5``: the dentability index ``Dz(C, eps)``,
* ``mu6``: existence of a bounded convex ``eps``-uniformly convex function, built
  from tree heights or from half-derivation layers.

"Bounded" means below a search cap, so every value is reported as a bracket
``[lo, hi]``: ``lo`` is the largest scale tested that definitely failed and ``hi``
the smallest that succeeded.  Searches that run out of budget decide nothing,
which widens the bracket instead of guessing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import INF, NormSpec, Support, as_metric, lp_norm
from .exceptions import CapExceeded

MU_NAMES = ("mu1", "mu2", "mu5", "mu6")


@dataclass
class MuReport:
    mu1: list
    mu2: list
    mu5: list
    mu6: list
    fixture: str = ""
    dictionary: str = "default"
    caps: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def bracket(self, name):
        return self.__dict__[name]

    def to_json(self) -> dict:
        out = {k: [_num(v) for v in self.bracket(k)] for k in MU_NAMES}
        out.update({"fixture": self.fixture, "dictionary": self.dictionary, "caps": self.caps,
                    "flags": self.flags, "mu3": None, "mu4": None,
                    "note": "mu3 and mu4 are defined through ultrapowers and have no "
                            "finite-dimensional proxy"})
        return out

    @staticmethod
    def from_json(spec) -> "MuReport":
        return MuReport(*[[_val(v) for v in spec[k]] for k in MU_NAMES],
                        fixture=spec.get("fixture", ""), dictionary=spec.get("dictionary", ""),
                        caps=spec.get("caps", {}), flags=spec.get("flags", {}))


def _num(v):
    return "inf" if v == INF else float(v)


def _val(v):
    return INF if v == "inf" else float(v)


def threshold_bracket(ok, eps_grid, steps: int = 3) -> tuple:
    """Bracket of ``inf{e : ok(e)}`` from a sweep over ``eps_grid`` and ``steps`` bisections.

    ``ok`` returns True, False, or None for an inconclusive search; inconclusive
    scales move neither end.  Returns ``(lo, hi, flags)`` with ``hi = inf`` when no
    tested scale succeeded.
    """
    grid = sorted(float(e) for e in eps_grid)
    lo, hi = 0.0, INF
    unknown = []
    seen = {}
    raw = ok

    def ok(e):
        if e not in seen:
            seen[e] = raw(e)
        return seen[e]

    for e in grid:
        r = ok(e)
        if r is True:
            hi = e
            break
        if r is False:
            lo = e
        else:
            unknown.append(e)
    if hi < INF:
        a = lo
        for _ in range(steps):
            mid = 0.5 * (a + hi)
            if mid <= 0:
                break
            r = ok(mid)
            if r is True:
                hi = mid
            else:
                a = mid
                if r is False:
                    lo = mid
                elif mid not in unknown:
                    unknown.append(mid)
    flags = {"untested_below": lo == 0.0, "no_success": hi == INF, "inconclusive": unknown}
    return lo, hi, flags


def default_caps(tree: int = 2, budget: int = 4000) -> dict:
    """Caps linked so that the chain inequalities are meaningful.

    Block averages of a separated sequence of length ``2**(T+1)`` form a tree of
    height ``T + 1``; the root of a ``2 eps`` tree of height ``h`` survives ``h``
    derivations at ``eps``.  Hence ``sequence = 2**(tree+1)`` and ``dz = tree + 1``.
    """
    return {"tree": tree, "sequence": 2 ** (tree + 1), "dz": tree + 1, "half_dz": 4 * (tree + 1),
            "budget": budget}


def measure_suite(support: Support, mask=None, norm: NormSpec | None = None, eps_grid=(),
                  caps=None, dictionary=None, steps: int = 3, fixture: str = "") -> MuReport:
    """Bracket ``mu1, mu2, mu5, mu6`` for the body ``support[mask]``.

    ``caps`` keys (see :func:`default_caps`): ``tree`` bounds heights for mu2 and the
    tree route of mu6, ``sequence`` and ``budget`` the sequence search for mu1, ``dz``
    the index for mu5 and ``half_dz`` the derivation route of mu6.
    """
    from .dentability import CAP_EXCEEDED, dz_index, uc_function_from_derivation
    from .envelope import convex_envelope
    from .moduli import delta_modulus
    from .transforms import exp_transform
    from .trees import convex_separation_sequence, height_function, height_table

    base = default_caps()
    if caps and "tree" in caps:
        base = default_caps(caps["tree"], caps.get("budget", base["budget"]))
    caps = {**base, **(caps or {})}
    norm = norm or lp_norm(support.dim, 2)
    mask = np.ones(support.n, bool) if mask is None else np.asarray(mask, bool)
    body = support.subset(mask)
    metric = as_metric(norm, body.dim)
    dict_id = "default" if dictionary is None else (dictionary if isinstance(dictionary, str)
                                                     else f"{len(dictionary)}-directions")
    if body.n == 1:
        zero = [0.0, 0.0]
        return MuReport(zero, list(zero), list(zero), list(zero), fixture, dict_id, caps,
                        {"single_point": True})
    pts = body.coords

    def ok1(e):
        res = convex_separation_sequence(pts, e, caps["sequence"], norm, caps["budget"])
        if res["witness"] is not None:
            return False
        return True if res["exhaustive"] else None

    def ok2(e):
        return not height_table(body, e, metric, caps["tree"]).exceeded.any()

    def ok5(e):
        return dz_index(body, None, e, dictionary, metric, caps["dz"]).dz != CAP_EXCEEDED

    def ok6(e):
        # route 1: tree heights, exponential, envelope
        try:
            h = height_function(body, e, metric, caps["tree"])
            phi = convex_envelope(exp_transform(h, 1.0))
            if delta_modulus(phi, e, metric).delta > 0:
                return True
        except CapExceeded:
            pass
        # route 2: layers of the half-derivation
        try:
            phi, delta = uc_function_from_derivation(body, None, e, dictionary, metric,
                                                     caps["half_dz"])
        except CapExceeded:
            return False
        return bool(delta > 0)

    out, flags = {}, {}
    for name, ok in (("mu1", ok1), ("mu2", ok2), ("mu5", ok5), ("mu6", ok6)):
        lo, hi, fl = threshold_bracket(ok, eps_grid, steps)
        out[name] = [lo, hi]
        flags[name] = fl
    return MuReport(out["mu1"], out["mu2"], out["mu5"], out["mu6"], fixture, dict_id, caps, flags)


def _le(a, b, factor=1.0, tol=1e-12) -> bool:
    """Bracket ``a`` can sit below ``factor`` times bracket ``b``."""
    return a[0] <= factor * b[1] + tol


def chain_check(report: MuReport) -> dict:
    """``mu1 <= mu2``, ``mu6 <= mu2``, ``mu2 <= 2 mu5`` and ``mu6 <= mu5`` up to bracket slack."""
    for k in MU_NAMES:
        lo, hi = report.bracket(k)
        if not lo <= hi:
            return {"holds": False, "reason": f"{k} bracket is inverted", "checks": {}}
    checks = {"mu1<=mu2": _le(report.mu1, report.mu2),
              "mu6<=mu2": _le(report.mu6, report.mu2),
              "mu2<=2mu5": _le(report.mu2, report.mu5, 2.0),
              "mu6<=mu5": _le(report.mu6, report.mu5)}
    return {"holds": all(checks.values()), "checks": checks}


def resolution_study(make_body, resolutions, eps_grid, tree_cap: int = 2, steps: int = 3,
                     norm=None, fixture: str = "", budget: int = 20000) -> dict:
    """Run :func:`measure_suite` on successively finer grids.

    Caps stay fixed so that every resolution brackets the same capped quantities;
    each refinement adds one bisection step.
    """
    reports = []
    for r, res in enumerate(resolutions):
        support, mask = make_body(res)
        rep = measure_suite(support, mask, norm, eps_grid, default_caps(tree_cap, budget),
                            steps=steps + r, fixture=f"{fixture}@{res}")
        reports.append(rep)
    widths = {k: [r.bracket(k)[1] - r.bracket(k)[0] for r in reports] for k in MU_NAMES}
    shrink = {k: all(b <= a + 1e-12 for a, b in zip(w, w[1:])) for k, w in widths.items()}
    return {"reports": reports, "widths": widths, "shrinks": shrink,
            "chains": [chain_check(r) for r in reports]}

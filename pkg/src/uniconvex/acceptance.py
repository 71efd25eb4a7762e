"""End-to-end acceptance checks.

Each runner returns ``(passed, details)`` where ``details`` is JSON-safe and free
of timings, so two runs can be compared byte for byte.
"""
from __future__ import annotations

import math
import time

import numpy as np

from . import fixtures as fx
from .domain import box_grid, interval_grid, lp_norm, tabulate
from .envelope import convex_envelope, jensen_fixpoint, local_envelope_reduction
from .exceptions import CapExceeded
from .io import dumps, jsonable
from .moduli import (coercivity_profile, delta_modulus, gage, minimizer_stability_probe,
                     stability_eta)

TOL = 1e-9


def a1_example_modulus():
    f = fx.ex26()
    rep = delta_modulus(f, 1.0)
    err = abs(rep.delta - 1.0 / 36.0)
    return err <= 1e-3, {"delta": rep.delta, "expected": 1.0 / 36.0, "abs_error": err,
                         "witness": rep.witness, "grid_points": f.support.n}


def a2_gage_sandwich(seeds=range(50), eps_list=(0.25, 0.5, 1.0)):
    worst_low, worst_high, rows = math.inf, math.inf, 0
    for seed in seeds:
        f = fx.rand_convex(seed)
        for e in eps_list:
            d = delta_modulus(f, e).delta
            p = gage(f, e)
            worst_low = min(worst_low, p - 2 * d)
            worst_high = min(worst_high, 4 * d - p)
            rows += 1
    ok = worst_low >= -TOL and worst_high >= -TOL
    return ok, {"cases": rows, "min_p_minus_2delta": worst_low, "min_4delta_minus_p": worst_high}


def _uc_fixtures(count=20):
    out = [("ex26", fx.ex26())]
    for seed in range(count):
        dim = 1 if seed < count // 2 else 2
        out.append((f"rand_uc({seed},{dim})", fx.rand_uc(seed, dim)))
    return out


def a3_envelope_modulus(eps=1.0):
    rows = []
    for name, f in _uc_fixtures():
        d = delta_modulus(f, eps).delta
        env = convex_envelope(f)
        de = delta_modulus(env, 1.01 * eps).delta
        rows.append({"fixture": name, "delta": d, "envelope_delta": de,
                     "nonconvex": bool(delta_modulus(f, 2 * f.support.unit).delta < 0)})
    # +-1/3 must be grid points for the envelope to equal max(0, x^2 - 1/9)
    g = fx.ex26(step=2.0 ** -8 / 3)
    x = g.coords[:, 0]
    ref = np.maximum(0.0, x ** 2 - 1.0 / 9.0)
    env = convex_envelope(g).values
    oracle = jensen_fixpoint(g).values
    closed = float(np.abs(env - ref).max())
    jensen = float(np.abs(env - oracle).max())
    ok = all(r["delta"] > 0 and r["envelope_delta"] > 0 and r["nonconvex"] for r in rows) \
        and closed <= TOL and jensen <= TOL
    return ok, {"fixtures": rows, "closed_form_error": closed, "jensen_error": jensen,
                "closed_form_grid_step": 2.0 ** -8 / 3}


def a4_local_reduction(eps=1.0, seeds=range(20), sample=48):
    """Every point in 1D; a seeded sample of ``sample`` points per 2D fixture."""
    worst = {1: 0.0, 2: 0.0}
    for dim in (1, 2):
        for seed in seeds:
            f = fx.rand_uc(seed, dim)
            env = convex_envelope(f).values
            pts = np.arange(f.support.n)
            if dim == 2:
                pts = np.sort(np.random.default_rng(seed).choice(pts, sample, replace=False))
            for k in pts:
                v = local_envelope_reduction(f, f.coords[k], eps)
                worst[dim] = max(worst[dim], abs(v - env[k]))
    ok = max(worst.values()) <= TOL
    return ok, {"max_abs_difference": {str(k): v for k, v in worst.items()}}


def _tree_height_fixtures():
    sq = fx.square().support
    ball = fx.linf_ball(step=2.0 ** -3).support
    return [("interval", fx.interval().support, None, 0.5),
            ("interval", fx.interval().support, None, 0.25),
            ("square", sq, None, 0.5),
            ("linf_ball", ball, lp_norm(2, "inf"), 0.5),
            ("linf_ball", ball, lp_norm(2, "inf"), 1.0)]


def a5_exponential_gap():
    from .transforms import exp_transform
    from .trees import height_function

    rows = []
    for name, s, norm, eps in _tree_height_fixtures():
        h = height_function(s, eps, norm)
        g = exp_transform(h, 1.0)
        d = delta_modulus(g, eps, norm).delta
        bound = 3.0 ** h.inf() / 2
        rows.append({"fixture": name, "eps": eps, "delta": d, "bound": bound,
                     "holds": bool(d >= bound - TOL)})
    return all(r["holds"] for r in rows), {"rows": rows}


def a6_height_bound():
    from .transforms import exp_transform
    from .trees import height_function, max_separated_tree_height

    rows = []
    cases = [("interval", fx.interval().support, None, 0.5),
             ("interval", fx.interval().support, None, 0.25),
             ("linf_ball", fx.linf_ball(step=2.0 ** -3).support, lp_norm(2, "inf"), 0.5),
             ("linf_ball", fx.linf_ball(step=2.0 ** -3).support, lp_norm(2, "inf"), 1.0)]
    for name, s, norm, eps in cases:
        h = height_function(s, eps, norm)
        phi = convex_envelope(exp_transform(h, 1.0))
        d = delta_modulus(phi, eps, norm).delta
        height = max_separated_tree_height(s, eps, norm)["height"]
        bound = (phi.sup() - phi.inf()) / d if d > 0 else math.inf
        rows.append({"fixture": name, "eps": eps, "max_height": height, "delta": d,
                     "bound": bound, "certified": bool(d > 0),
                     "holds": bool(d > 0 and height <= bound + TOL)})
    return all(r["holds"] for r in rows), {"rows": rows}


def a7_tree_heights():
    from .trees import max_separated_tree_height

    s = interval_grid(0.0, 1.0, 2.0 ** -6).support
    expected = {1.0: 1, 0.5: 2, 1.01: 0, 1.5: 0}
    got = {e: max_separated_tree_height(s, e)["height"] for e in expected}
    return got == expected, {"heights": {str(e): got[e] for e in expected},
                             "expected": {str(e): v for e, v in expected.items()}}


def a8_dentability_index():
    from .dentability import dz_index

    s = interval_grid(0.0, 1.0, 2.0 ** -6).support
    trace = dz_index(s, None, 0.3, np.array([[1.0], [-1.0]]))
    x = s.coords[:, 0]
    middle = (x >= 0.3) & (x <= 0.7)
    stages_ok = (len(trace.stages) == 3 and trace.stages[0].all()
                 and np.array_equal(trace.stages[1], middle) and not trace.stages[2].any())
    return bool(trace.dz == 2 and stages_ok), {
        "dz": trace.dz, "stage_sizes": [int(st.sum()) for st in trace.stages],
        "stage1_range": [float(x[trace.stages[1]].min()), float(x[trace.stages[1]].max())]}


def a9_derivation_roundtrip(eps=0.3, eps_prime=0.7):
    from .dentability import CAP_EXCEEDED, dz_index, uc_function_from_derivation
    from .envelope import lower_planes

    s = fx.square().support
    dz_small = dz_index(s, None, eps).dz
    phi, delta = uc_function_from_derivation(s, None, eps_prime)
    # all pairs: midpoints off the grid use the piecewise-linear extension of phi
    X, v = phi.coords, phi.values
    S, c = lower_planes(X, v)
    mid = 0.5 * (X[:, None, :] + X[None, :, :]).reshape(-1, X.shape[1])
    ext = (mid @ S.T + c).max(axis=1).reshape(len(X), len(X))
    gap = 0.5 * (v[:, None] + v[None, :]) - ext
    dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    near = gap <= delta
    count = int(near.sum())
    worst = float(dist[near].max())
    implication = worst <= eps_prime * (1 + 1e-12)
    dz = dz_index(s, None, eps_prime).dz
    osc = phi.sup() - phi.inf()
    bound = osc / delta + 1 if delta > 0 else math.inf
    converse = dz != CAP_EXCEEDED and dz <= bound + TOL
    ok = dz_small != CAP_EXCEEDED and delta > 0 and implication and converse
    return ok, {"dz_at_eps": dz_small, "delta": delta, "pairs_below_delta": count,
                "max_distance_below_delta": worst, "dz_at_eps_prime": dz,
                "osc_phi": osc, "dz_bound": bound}


def a10_dc_approximation(eps=0.2):
    from .dc_approx import cepedello_approx, dc_bounds_check
    from .moduli import midpoint_convexity_defect

    f = fx.ex26(step=2.0 ** -6, lo=-1.0, hi=1.0)
    g, dc, err = cepedello_approx(f, None, eps)
    du = midpoint_convexity_defect(dc.u)
    dv = midpoint_convexity_defect(dc.v)
    bounds = dc_bounds_check(f)
    ok = err <= eps + 1e-6 and du >= -TOL and dv >= -TOL and bounds["holds"]
    return ok, {"error": err, "u_defect": du, "v_defect": dv, "c": dc.c,
                "levels": dc.info["levels"], "zeta": dc.info["zeta"],
                "waypoints": dc.info["waypoints"], "bounds": bounds}


def a11_plane_renorming(eps=0.5, steps=(2.0 ** -5, 2.0 ** -6)):
    from .renorming import enflo_pipeline

    norm = lp_norm(2, "inf")
    runs = []
    for k, step in enumerate(steps):
        r = enflo_pipeline(norm, box_grid(-1.0, 1.0, step, 2), [eps])
        runs.append({"step": step, "F0": r["F0"], "F_min_on_sphere": r["F_min_on_sphere"],
                     "symmetry_error": r["symmetry_error"],
                     "input_modulus": r["input_modulus"][eps],
                     "output_modulus": r["output_modulus"][eps],
                     "max_height": r["stages"][0]["max_height"],
                     "F0_at_most_1_17": bool(r["F0"] <= 1.0 / 17.0)})
    main = runs[0]
    ok = (abs(main["input_modulus"]) <= 1e-6 and main["output_modulus"] > 0
          and main["symmetry_error"] <= TOL and main["F_min_on_sphere"] >= 1 - TOL)
    return ok, {"gated_step": steps[0], "runs": runs,
                "informative": "F0 <= 1/17 is reported per step and does not gate"}


def _convex_pair(seed, step=2.0 ** -5):
    rng = np.random.default_rng(seed)
    a1, a2 = rng.uniform(0.5, 2.0, 2)
    f1 = fx.rand_convex(2 * seed, step=step)
    f2 = fx.rand_convex(2 * seed + 1, step=step)
    x1, x2 = f1.coords[:, 0], f2.coords[:, 0]
    return f1.with_values(f1.values + a1 * x1 ** 2), f2.with_values(f2.values + a2 * x2 ** 2)


def a12_infimal_convolution(seeds=range(20), scales=((0.25, 0.25), (0.25, 0.5), (0.5, 0.5))):
    from .transforms import inf_convolution

    worst = math.inf
    for seed in seeds:
        f1, f2 = _convex_pair(seed)
        h = inf_convolution(f1, f2)
        for e1, e2 in scales:
            lhs = delta_modulus(h, e1 + e2).delta
            rhs = min(delta_modulus(f1, e1).delta, delta_modulus(f2, e2).delta)
            worst = min(worst, lhs - rhs)
    return worst >= -TOL, {"pairs": len(seeds), "scales": scales, "min_slack": worst}


def a13_coercivity_stability(eps=1.0, top_fraction=0.9):
    rows = []
    ex = fx.ex26(step=2.0 ** -6)
    for name, f in [("ex26", ex)] + _uc_fixtures()[1:]:
        norm = lp_norm(f.dim, 2)
        env = convex_envelope(f)
        p = gage(env, eps, norm)
        bound = p / (4 * eps ** 2)
        top = float(norm(f.coords[f.dom]).max())
        radii = [top * top_fraction, top]
        prof = coercivity_profile(f, norm, radii)
        rows.append({"fixture": name, "gage": p, "bound": bound, "profile": prof,
                     "holds": bool(bound > 0 and all(v >= bound - TOL for _, v in prof))})
    env = convex_envelope(ex)
    eta = stability_eta(env, eps)
    probe = minimizer_stability_probe(env, None, eta["eta"], 200, 0, eps)
    ok = all(r["holds"] for r in rows) and probe["within"]
    return ok, {"coercivity": rows, "stability": {"eta": eta, "max_distance":
                                                  probe["max_distance"],
                                                  "within": probe["within"]}}


def _ball_body(kind):
    def make(step):
        f = fx.linf_ball(step) if kind == "linf_ball" else fx.l1_ball(step)
        return f.support, f.dom
    return make


def a14_swc_chain(resolutions=(2.0 ** -2, 2.0 ** -3), eps_grid=(0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5),
                  tree_cap=2, budget=8000, steps=3):
    from .swc import resolution_study

    out = {}
    ok = True
    for kind in ("linf_ball", "l1_ball"):
        study = resolution_study(_ball_body(kind), resolutions, eps_grid, tree_cap, steps,
                                 fx.fixture_norm(kind), kind, budget)
        chains = [c["holds"] for c in study["chains"]]
        shrinks = study["shrinks"]
        ok = ok and all(chains) and all(shrinks.values())
        out[kind] = {"reports": [r.to_json() for r in study["reports"]],
                     "chains": study["chains"], "widths": study["widths"], "shrinks": shrinks}
    return ok, out


CRITERIA = {
    "A1": (a1_example_modulus, "modulus of |x^2 - 1/9| at scale 1 equals 1/36"),
    "A2": (a2_gage_sandwich, "2 delta <= gage <= 4 delta on random convex functions"),
    "A3": (a3_envelope_modulus, "envelopes of uniformly convex fixtures stay uniformly convex"),
    "A4": (a4_local_reduction, "local envelope on eps-balls equals the global envelope"),
    "A5": (a5_exponential_gap, "3**f of a tree-height function has gap >= 3**inf f / 2"),
    "A6": (a6_height_bound, "tree height <= oscillation / modulus"),
    "A7": (a7_tree_heights, "exhaustive tree heights on [0, 1]"),
    "A8": (a8_dentability_index, "hand-computed dentability index"),
    "A9": (a9_derivation_roundtrip, "derivation layers give a uniformly convex function"),
    "A10": (a10_dc_approximation, "difference-of-convex approximation within eps"),
    "A11": (a11_plane_renorming, "uniformly convex renorming of the plane with the max norm"),
    "A12": (a12_infimal_convolution, "modulus of an infimal convolution"),
    "A13": (a13_coercivity_stability, "coercivity and minimizer stability"),
    "A14": (a14_swc_chain, "chain of threshold measures on two balls"),
}


def run_criterion(cid: str) -> dict:
    """Run one criterion; the result has ``id``, ``passed``, ``details`` and ``seconds``."""
    fn, desc = CRITERIA[cid]
    t0 = time.perf_counter()
    try:
        ok, details = fn()
    except CapExceeded as exc:
        ok, details = False, {"error": f"cap exceeded: {exc}"}
    return {"id": cid, "description": desc, "passed": bool(ok), "details": jsonable(details),
            "seconds": time.perf_counter() - t0}


def result_json(result: dict) -> str:
    """Canonical JSON of a result without its timing."""
    return dumps({k: v for k, v in result.items() if k != "seconds"})


def determinism_check(results) -> dict:
    """Rerun every criterion in ``results`` and compare canonical JSON byte for byte."""
    t0 = time.perf_counter()
    rows = {}
    for r in results:
        again = run_criterion(r["id"])
        rows[r["id"]] = result_json(r) == result_json(again)
    return {"id": "A15", "description": "identical reruns give byte-identical JSON",
            "passed": all(rows.values()), "details": {"identical": rows},
            "seconds": time.perf_counter() - t0}


def format_line(result: dict) -> str:
    status = "PASS" if result["passed"] else "FAIL"
    return f"{result['id']:>4} {status}  {result['description']}  ({result['seconds']:.1f} s)"


def run_all(ids=None, determinism: bool = True, echo=print) -> list:
    ids = list(ids or CRITERIA)
    results = []
    for cid in ids:
        r = run_criterion(cid)
        results.append(r)
        if echo:
            echo(format_line(r))
    if determinism:
        r = determinism_check(results)
        results.append(r)
        if echo:
            echo(format_line(r))
    return results

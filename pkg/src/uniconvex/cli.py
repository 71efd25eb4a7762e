"""Command-line interface.

Every subcommand prints or writes deterministic JSON; ``--report DIR`` also writes
SVG figures and a manifest with input and output hashes.

Exit codes: 0 success, 2 precondition error, 3 cap exceeded, 4 I/O or parse error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .domain import PseudometricSpec, box_grid, lp_norm, pullback_metric
from .exceptions import CapExceeded, PreconditionError
from .io import dumps, jsonable, load_function, write_json, write_manifest

EXIT_OK, EXIT_PRE, EXIT_CAP, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _norm_arg(name: str, dim: int):
    p = {"l1": 1, "l2": 2, "linf": "inf"}.get(name)
    if p is None:
        raise PreconditionError(f"unknown norm {name!r}")
    return lp_norm(dim, p)


def _metric(args, f):
    """``norm``, ``pullback:<fn.json>`` or ``table:<matrix.json>``, aligned with ``f``."""
    spec = args.metric or "norm"
    if spec == "norm":
        return _norm_arg(args.norm, f.dim)
    kind, _, path = spec.partition(":")
    if kind == "pullback" and path:
        g = load_function(path)
        if g.support.n != f.support.n or not np.allclose(g.coords, f.coords):
            raise PreconditionError("pullback map must live on the support of --fn")
        return pullback_metric(np.where(g.dom, g.values, 0.0))
    if kind == "table" and path:
        data = json.loads(Path(path).read_text())
        table = data["table"] if isinstance(data, dict) else data
        return PseudometricSpec("table", table=table)
    raise ValueError(f"cannot parse --metric {spec!r}")


def _dictionary(spec):
    if spec is None:
        return None
    if spec == "axes":
        return "axes"
    kind, _, n = spec.partition(":")
    if kind == "dirs" and n.isdigit():
        return f"{int(n)}-directions"
    n, _, kind = spec.partition("-")
    if kind == "directions" and n.isdigit():
        return spec
    raise ValueError(f"cannot parse --dict {spec!r}")


def _need(args, name):
    if getattr(args, name) is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")
    return getattr(args, name)


def _load(args, step=None):
    """Load ``--fn``; a fixture spec is rebuilt at ``step`` (or ``--grid-step``) when given."""
    path = _need(args, "fn")
    refine = step is not None
    step = step or getattr(args, "grid_step", None)
    if step is None:
        return load_function(path)
    spec = json.loads(Path(path).read_text())
    if not (isinstance(spec, dict) and "fixture" in spec):
        if refine:
            raise PreconditionError("refinement needs a fixture spec for --fn")
        return load_function(spec)
    return load_function({**spec, "params": {**spec.get("params", {}), "step": step}})


def _body(f):
    """Points of ``dom(f)`` as a support (functions double as sets)."""
    return f.support.subset(f.dom)


# ---------------------------------------------------------------------------
# subcommands: each returns (result, figures) where figures maps name -> callable(path)


def cmd_modulus(args):
    from .moduli import delta_modulus, gage, quasi_modulus
    from .plotting import plot_functions_1d, plot_heatmap

    f = load_function(_need(args, "fn"))
    eps = _need(args, "eps")
    metric = _metric(args, f)
    if args.kind == "gage":
        result = {"kind": "gage", "epsilon": eps, "gage": gage(f, eps, metric)}
    else:
        rep = (quasi_modulus if args.kind == "quasi" else delta_modulus)(f, eps, metric)
        result = rep.to_json()
    if f.dim == 1:
        w = result.get("witness")
        chords = [((w[0][0], f(w[0])), (w[1][0], f(w[1])))] if w else []
        draw = lambda p: plot_functions_1d(p, [f], title=f.name or "function", chords=chords)
    else:
        draw = lambda p: plot_heatmap(p, f, f.name or "function")
    return result, {"function.svg": draw}


def cmd_envelope(args):
    from .envelope import convex_envelope
    from .plotting import plot_functions_1d, plot_heatmap

    f = load_function(_need(args, "fn"))
    env = convex_envelope(f, with_active=True)
    figs = {}
    if f.dim == 1:
        figs["envelope.svg"] = lambda p: plot_functions_1d(p, [f, env.envelope],
                                                           ["f", "envelope"], "convex envelope")
    elif f.dim == 2:
        figs["envelope.svg"] = lambda p: plot_heatmap(p, env.envelope, "convex envelope")
    return env.to_json(), figs


def cmd_transform(args):
    from . import transforms as tr
    from .plotting import plot_functions_1d

    op = args.kind
    if op == "radial":
        radii, out = tr.radial_uc(_norm_arg(args.norm, args.dim), _need(args, "eps"), args.levels)
        return {"radii": radii, "function": out.to_json()}, {}
    f = load_function(_need(args, "fn"))
    if op == "exp":
        out = tr.exp_transform(f, args.delta)
    elif op == "square":
        out = tr.square_transform(f)
    elif op == "lip":
        out = tr.lipschitz_regularization(f, None, args.c, _norm_arg(args.norm, f.dim))
    elif op == "infconv":
        out = tr.inf_convolution(f, load_function(_need(args, "fn2")))
    elif op == "enlarge":
        out = tr.domain_enlargement(f, args.eta, _norm_arg(args.norm, f.dim))
    elif op == "series":
        extra = [load_function(p) for p in (args.fn2 or "").split(",") if p]
        weights = args.weights or [1.0] * (1 + len(extra))
        out = tr.series_combine([f] + extra, weights)
    else:
        raise UsageError(f"unknown transform {op!r}")
    figs = {}
    if f.dim == 1:
        figs["transform.svg"] = lambda p: plot_functions_1d(p, [f, out], ["input", op], op)
    return out.to_json(), figs


def cmd_tree(args):
    from .plotting import plot_tree
    from .trees import max_separated_tree_height

    f = load_function(_need(args, "fn"))
    s = _body(f)
    metric = _metric(args, f)
    if isinstance(metric, PseudometricSpec):
        metric = metric.restrict(f.dom)
    res = max_separated_tree_height(s, _need(args, "eps"), metric, root=args.root, cap=args.cap)
    tree = res["witness"]
    result = {"height": res["height"], "capped": res["capped"], "root": res["root"],
              "witness": tree.to_json()}
    return result, {"tree.svg": lambda p: plot_tree(p, tree, s.coords, "separated tree")}


def cmd_dent(args):
    from .dentability import dz_index
    from .plotting import plot_heatmap

    f = _load(args)
    metric = _metric(args, f)
    trace = dz_index(f.support, f.dom, _need(args, "eps"), _dictionary(args.dict), metric,
                     args.cap, kind=args.kind)
    figs = {}
    if f.dim == 2:
        layer = np.zeros(f.support.n)
        for n, st in enumerate(trace.stages):
            layer[st] = n
        lay = f.with_values(np.where(f.dom, layer, np.inf), name="layer")
        figs["derivation.svg"] = lambda p: plot_heatmap(p, lay, "derived sets")
        for n, st in enumerate(trace.stages):
            if not st.any():
                continue
            stage = f.with_values(np.where(st, 0.0, np.inf), name=f"stage {n}")
            figs[f"stage_{n:02d}.svg"] = lambda p, g=stage: plot_heatmap(p, g, g.name)
    result = trace.to_json(f.support)
    extras = {args.trace: result} if args.trace else {}
    return result, figs, extras


def _ball_figure(norms, labels, title):
    from .moduli import sphere_samples
    from .plotting import plot_balls

    balls = [sphere_samples(n, 360) for n in norms]
    return lambda p: plot_balls(p, balls, labels, title)


def _ball_extra(args, figs):
    return {args.ball_svg: figs["ball.svg"]} if args.ball_svg and "ball.svg" in figs else {}


def cmd_renorm(args):
    from .renorming import implication_scan, renorm_from_function

    f = _load(args)
    norm = _norm_arg(args.norm, f.dim)
    delta = _need(args, "eps")
    cnorm = renorm_from_function(f, None, delta, norm, levels=args.levels)
    result = cnorm.to_json()
    result["gauges"] = [g.to_json() for g in cnorm.gauges]
    if args.scan:
        result["implication"] = implication_scan(f, cnorm, cnorm.zeta, delta)
    figs = {}
    if f.dim == 2:
        figs["ball.svg"] = _ball_figure([norm, cnorm], [args.norm, "level-set norm"], "unit balls")
    return result, figs, _ball_extra(args, figs)


def cmd_enflo(args):
    from .renorming import enflo_pipeline

    norm = _norm_arg(args.norm, 2)
    eps = args.eps_list or [0.5]
    grid = box_grid(-1.0, 1.0, args.grid_step, 2)
    r = enflo_pipeline(norm, grid, eps, cap=args.cap)
    result = {k: v for k, v in r.items() if k not in ("F", "ball", "final_norm")}
    result["final_norm"] = r["final_norm"].to_json()
    result["F"] = r["F"].to_json()
    figs = {"ball.svg": _ball_figure([norm, r["final_norm"]], [args.norm, "renormed"],
                                     "unit balls")}
    return result, figs, _ball_extra(args, figs)


def cmd_dc_approx(args):
    from .dc_approx import cepedello_approx, dc_bounds_check
    from .plotting import plot_functions_1d

    f = _load(args)
    eps = _need(args, "eps")
    g, dc, err = cepedello_approx(f, None, eps, _dictionary(args.dict), args.cap,
                                  _norm_arg(args.norm, f.dim))
    result = {"error": err, "convexity": dc.convexity(), **dc.to_json()}
    if args.bounds:
        result["bounds"] = dc_bounds_check(f, None, dictionary=_dictionary(args.dict),
                                           cap=args.cap)
    figs = {}
    if f.dim == 1:
        fs = f.restrict(f.dom)
        figs["dc.svg"] = lambda p: plot_functions_1d(p, [fs, g], ["f", "u - v"],
                                                     "difference of convex approximation")
    extras = {}
    if args.out:
        extras[args.out] = g
    if args.decomp:
        extras[args.decomp] = dc
    return result, figs, extras


def cmd_swc(args):
    from .plotting import plot_brackets
    from .swc import chain_check, default_caps, measure_suite, resolution_study

    f = _load(args)
    norm = _norm_arg(args.norm, f.dim)
    grid = args.eps_list or [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5]
    tree = args.cap if args.cap_given else 2
    if args.resolutions < 1:
        raise PreconditionError("need at least one resolution")
    steps = [f.support.unit / 2 ** r for r in range(args.resolutions)]
    if args.resolutions > 1:

        def body(step):
            g = _load(args, step)
            return g.support, g.dom

        study = resolution_study(body, steps, grid, tree, args.steps, norm, f.name, args.budget)
        reports = study["reports"]
        result = {"resolutions": steps, "reports": [r.to_json() for r in reports],
                  "chains": study["chains"], "widths": study["widths"], "shrinks": study["shrinks"]}
    else:
        reports = [measure_suite(f.support, f.dom, norm, grid, default_caps(tree, args.budget),
                                 _dictionary(args.dict), args.steps, f.name)]
        result = {**reports[0].to_json(), "chain": chain_check(reports[0])}
    figs = {}
    for r, (step, rep) in enumerate(zip(steps, reports)):
        brackets = {k: rep.bracket(k) for k in ("mu1", "mu2", "mu5", "mu6")}
        figs[f"brackets_{r}.svg"] = lambda p, b=brackets, h=step: plot_brackets(
            p, b, f"threshold brackets, step {h:g}")
    return result, figs


def cmd_reproduce(args):
    from .acceptance import CRITERIA, determinism_check, format_line, run_criterion

    crit = _need(args, "criterion")
    ids = list(CRITERIA) if crit == "all" else [c.strip().upper() for c in crit.split(",")]
    results = []
    for cid in ids:
        if cid == "A15":
            continue
        if cid not in CRITERIA:
            raise UsageError(f"unknown criterion {cid!r}")
        results.append(run_criterion(cid))
        print(format_line(results[-1]), file=sys.stderr)
    if crit == "all" or "A15" in ids:
        base = results or [run_criterion(c) for c in CRITERIA]
        results.append(determinism_check(base))
        print(format_line(results[-1]), file=sys.stderr)
    out = {"criteria": [{k: v for k, v in r.items() if k != "seconds"} for r in results],
           "passed": all(r["passed"] for r in results)}
    return out, {}


COMMANDS = {"modulus": cmd_modulus, "envelope": cmd_envelope, "transform": cmd_transform,
            "tree": cmd_tree, "dent": cmd_dent, "renorm": cmd_renorm, "enflo": cmd_enflo,
            "dc-approx": cmd_dc_approx, "swc": cmd_swc, "reproduce": cmd_reproduce}


def _eps_list(text):
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = Parser(add_help=False)
    common.add_argument("--fn", help="function JSON: full spec or {\"fixture\": name, \"params\": {}}")
    common.add_argument("--eps", type=float, help="scale (delta for renorm)")
    common.add_argument("--metric", help="norm | pullback:<fn.json> | table:<matrix.json>")
    common.add_argument("--norm", default="l2", choices=["l1", "l2", "linf"])
    common.add_argument("--dict", help="axes | <n>-directions | dirs:<n>")
    common.add_argument("--cap", type=int, default=None, help="search or iteration cap")
    common.add_argument("--seed", type=int, default=0, help="seed recorded in the manifest")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker bound (results do not depend on it)")
    common.add_argument("--report", help="JSON output path (*.json) or directory; SVG figures "
                                         "and a manifest are written alongside")
    common.add_argument("--plot", help="write the main figure to this SVG path")

    p = Parser(prog="uniconvex", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)
    sp = sub.add_parser("modulus", parents=[common], help="modulus of uniform convexity")
    sp.add_argument("--kind", default="convex", choices=["convex", "quasi", "gage"])
    sub.add_parser("envelope", parents=[common], help="convex envelope with active sets")
    sp = sub.add_parser("transform", parents=[common], help="function transforms")
    sp.add_argument("--kind", required=True,
                    choices=["infconv", "exp", "lip", "enlarge", "square", "series", "radial"])
    sp.add_argument("--fn2", help="second function for infconv; comma list for series")
    sp.add_argument("--weights", type=_eps_list, help="series weights, one per function")
    sp.add_argument("--levels", type=int, default=4, help="levels of the radial function")
    sp.add_argument("--dim", type=int, default=2, help="dimension of the radial function")
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--eta", type=float, default=0.1)
    sp = sub.add_parser("tree", parents=[common], help="maximal separated dyadic tree")
    sp.add_argument("--root", type=_eps_list, help="root point, comma-separated coordinates")
    sp = sub.add_parser("dent", parents=[common], help="dentability index")
    sp.add_argument("--kind", default="full", choices=["full", "half"])
    sp.add_argument("--trace", help="also write the derivation trace to this JSON path")
    sp.add_argument("--grid-step", type=float, help="rebuild a fixture spec at this step")
    sp = sub.add_parser("renorm", parents=[common], help="level-set renorming")
    sp.add_argument("--levels", default="grid", choices=["grid", "geometric"])
    sp.add_argument("--scan", action="store_true", help="also scan the implication")
    sp.add_argument("--grid-step", type=float, help="rebuild a fixture spec at this step")
    sp.add_argument("--ball-svg", help="write the unit-ball figure to this path (2D)")
    sp = sub.add_parser("enflo", parents=[common], help="renorming of a planar norm")
    sp.add_argument("--grid-step", type=float, default=2.0 ** -5)
    sp.add_argument("--eps-list", type=_eps_list)
    sp.add_argument("--ball-svg", help="write the unit-ball figure to this path")
    sp = sub.add_parser("dc-approx", parents=[common], help="difference-of-convex approximation")
    sp.add_argument("--bounds", action="store_true", help="also bracket both thresholds")
    sp.add_argument("--out", help="write the approximation u - v to this JSON path")
    sp.add_argument("--decomp", help="write the convex pair (u, v) to this JSON path")
    sp.add_argument("--grid-step", type=float, help="rebuild a fixture spec at this step")
    sp = sub.add_parser("swc", parents=[common], help="threshold measures of a body")
    sp.add_argument("--resolutions", type=int, default=1, help="number of grids, halving the step")
    sp.add_argument("--grid-step", type=float, help="coarsest step for a fixture spec")
    sp.add_argument("--eps-list", type=_eps_list)
    sp.add_argument("--budget", type=int, default=8000)
    sp.add_argument("--steps", type=int, default=3)
    sp = sub.add_parser("reproduce", parents=[common], help="run acceptance criteria")
    sp.add_argument("--criterion", help="A1..A15, comma list, or all")
    return p


DEFAULT_CAPS = {"tree": 64, "dent": 64, "dc-approx": 64, "enflo": 64}


def _hash_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(argv=None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        args.cap_given = args.cap is not None
        if args.cap is None:
            args.cap = DEFAULT_CAPS.get(args.command, 64)
        result, figs, *rest = COMMANDS[args.command](args)
        extras = rest[0] if rest else {}
        text = dumps(result)
        if args.plot and figs:
            next(iter(figs.values()))(args.plot)
        written = []
        for path, obj in extras.items():
            path = Path(path).resolve()
            path.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(obj, dict) or hasattr(obj, "to_json"):
                write_json(path, obj)
            else:
                obj(path)
            written.append(str(path))
        if args.report:
            target = Path(args.report)
            if target.suffix == ".json":
                out, name, prefix = target.parent, target.name, f"{target.stem}."
            else:
                out, name, prefix = target, f"{args.command}.json", ""
            out.mkdir(parents=True, exist_ok=True)
            write_json(out / name, result)
            written.append(name)
            for fig, draw in figs.items():
                draw(out / f"{prefix}{fig}")
                written.append(f"{prefix}{fig}")
            inputs = {k: _hash_file(v) for k, v in (("fn", args.fn), ("fn2", getattr(args, "fn2", None)))
                      if v and Path(v).is_file()}
            params = {k: v for k, v in sorted(vars(args).items())
                      if k not in ("report", "plot", "threads", "cap_given")}
            write_manifest(out, written, {"subcommand": args.command, "inputs": inputs,
                                          "parameters": jsonable(params), "seed": args.seed,
                                          "threads": args.threads, "version": __version__,
                                          "wall_time": round(time.perf_counter() - t0, 3)},
                           name=f"{prefix}manifest.json")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except PreconditionError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_PRE
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

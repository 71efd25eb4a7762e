"""Deterministic catalogue of test functions and bodies.

Every builder returns a :class:`TabFunc`; bodies such as balls are zero
functions whose domain is the body.  Random builders take a mandatory seed.
"""
from __future__ import annotations

import numpy as np

from .domain import TabFunc, box_grid, interval_grid, lp_norm, tabulate
from .exceptions import PreconditionError


def ex26(step: float = 2.0 ** -10, lo: float = -2.0, hi: float = 2.0) -> TabFunc:
    """``|x^2 - 1/9|``: continuous, not convex, uniformly convex at scale 1 with gap 1/36."""
    return tabulate(interval_grid(lo, hi, step), lambda c: np.abs(c[:, 0] ** 2 - 1.0 / 9.0), "ex26")


def ex211(step: float = 2.0 ** -6, lo: float = -1.0, hi: float = 1.0) -> TabFunc:
    """``x`` for ``x < 0`` and ``x / 2`` after: concave but uniformly quasi-convex."""
    return tabulate(interval_grid(lo, hi, step),
                    lambda c: np.where(c[:, 0] < 0, c[:, 0], 0.5 * c[:, 0]), "ex211")


def interval(step: float = 2.0 ** -6) -> TabFunc:
    """Identity map on ``[0, 1]``."""
    return tabulate(interval_grid(0.0, 1.0, step), lambda c: c[:, 0], "interval")


def linf_ball(step: float = 2.0 ** -5, dim: int = 2) -> TabFunc:
    """Zero function on the grid ``[-1, 1]^dim``, the unit ball of the max norm."""
    return tabulate(box_grid(-1.0, 1.0, step, dim), lambda c: np.zeros(len(c)), "linf_ball")


def l1_ball(step: float = 2.0 ** -5, dim: int = 2) -> TabFunc:
    """Zero function on the grid points of the unit ball of the sum norm."""
    g = box_grid(-1.0, 1.0, step, dim).support
    inside = np.abs(g.coords).sum(axis=1) <= 1 + 1e-12
    return TabFunc(g, np.where(inside, 0.0, np.inf), "l1_ball")


def square(step: float = 2.0 ** -4) -> TabFunc:
    """Zero function on ``[0, 1]^2``."""
    return tabulate(box_grid(0.0, 1.0, step, 2), lambda c: np.zeros(len(c)), "square")


def disc_quadratic(step: float = 2.0 ** -4) -> TabFunc:
    """``|x|^2`` on the grid points of the Euclidean unit disc."""
    g = box_grid(-1.0, 1.0, step, 2).support
    r2 = (g.coords ** 2).sum(axis=1)
    return TabFunc(g, np.where(r2 <= 1 + 1e-12, r2, np.inf), "disc_quadratic")


def rand_convex(seed: int, max_knots: int = 129, step: float = 2.0 ** -6) -> TabFunc:
    """Random convex piecewise-linear function on ``[-1, 1]`` with at most ``max_knots`` knots."""
    rng = np.random.default_rng(seed)
    g = interval_grid(-1.0, 1.0, step).support
    x = g.coords[:, 0]
    k = int(rng.integers(2, min(max_knots, x.size) + 1))
    knots = np.sort(rng.choice(x.size, size=k, replace=False))
    slopes = np.sort(rng.normal(0.0, 2.0, size=k - 1))
    kv = np.empty(k)
    kv[0] = rng.normal()
    kv[1:] = kv[0] + np.cumsum(slopes * np.diff(x[knots]))
    # linear interpolation between knots, extended by the end slopes
    vals = np.interp(x, x[knots], kv)
    left, right = x < x[knots[0]], x > x[knots[-1]]
    vals[left] = kv[0] + slopes[0] * (x[left] - x[knots[0]])
    vals[right] = kv[-1] + slopes[-1] * (x[right] - x[knots[-1]])
    return TabFunc(g, vals, f"rand_convex({seed})")


def rand_uc(seed: int, dim: int = 1, step: float | None = None, eps: float = 1.0) -> TabFunc:
    """Random non-convex function with a positive gap at scale ``eps``.

    A quadratic ``a |x|^2`` (gap ``a eps^2 / 4``) plus a bumpy term of oscillation
    below ``a eps^2 / 8``, so the gap stays positive while convexity fails.
    """
    if dim not in (1, 2):
        raise PreconditionError("random uniformly convex fixtures exist in dimension 1 and 2")
    rng = np.random.default_rng(seed)
    step = step or (2.0 ** -5 if dim == 1 else 2.0 ** -3)
    g = box_grid(-1.0, 1.0, step, dim).support
    X = g.coords
    a = rng.uniform(0.5, 2.0)
    centre = rng.uniform(-0.3, 0.3, size=dim)
    freq = rng.uniform(12.0, 20.0, size=dim)
    phase = rng.uniform(0, 2 * np.pi, size=dim)
    bump = np.prod(np.cos(freq * X + phase), axis=1)
    amp = a * eps ** 2 / 8 * rng.uniform(0.3, 0.9) / 2
    vals = a * ((X - centre) ** 2).sum(axis=1) + amp * bump
    return TabFunc(g, vals, f"rand_uc({seed},{dim})")


CATALOG = {
    "ex26": (ex26, "the function |x^2 - 1/9| on [-2, 2]"),
    "ex211": (ex211, "piecewise-linear concave, uniformly quasi-convex"),
    "interval": (interval, "identity on [0, 1]"),
    "linf_ball": (linf_ball, "unit ball of the max norm in the plane"),
    "l1_ball": (l1_ball, "unit ball of the sum norm in the plane"),
    "square": (square, "unit square [0, 1]^2"),
    "disc_quadratic": (disc_quadratic, "squared Euclidean norm on the unit disc"),
    "rand_convex": (rand_convex, "seeded random convex piecewise-linear function"),
    "rand_uc": (rand_uc, "seeded random non-convex uniformly convex function"),
}

FIXTURE_NORMS = {"linf_ball": ("lp", "inf"), "l1_ball": ("lp", 1)}


def fixture_corpus() -> dict:
    """Name -> description for every builder."""
    return {k: v[1] for k, v in CATALOG.items()}


def build(name: str, **params) -> TabFunc:
    if name not in CATALOG:
        raise PreconditionError(f"unknown fixture {name!r}")
    return CATALOG[name][0](**params)


def fixture_norm(name: str, dim: int = 2):
    kind, p = FIXTURE_NORMS.get(name, ("lp", 2))
    return lp_norm(dim, p)

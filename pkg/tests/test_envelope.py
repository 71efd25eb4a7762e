import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from uniconvex import (box_grid, convex_envelope, delta_modulus, interval_grid,
                       jensen_fixpoint, local_envelope_reduction, tabulate)
from uniconvex.envelope import lower_planes
from uniconvex.fixtures import ex26, rand_uc


def lp_envelope(coords, values, x):
    """min sum l_k f(x_k) subject to sum l_k x_k = x, l in the simplex."""
    n = len(values)
    A = np.vstack([coords.T, np.ones(n)])
    b = np.append(x, 1.0)
    r = linprog(values, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return r.fun


def test_envelope_of_ex26_is_clipped_square():
    f = ex26(step=2.0 ** -8 / 3)
    env = convex_envelope(f)
    x = f.coords[:, 0]
    assert np.max(np.abs(env.values - np.maximum(0.0, x ** 2 - 1 / 9))) < 1e-9
    assert np.max(np.abs(env.values - jensen_fixpoint(f).values)) < 1e-9


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 1000))
def test_envelope_2d_matches_lp(seed):
    rng = np.random.default_rng(seed)
    g = box_grid(-1.0, 1.0, 0.5, 2)
    f = tabulate(g, lambda c: rng.normal(size=len(c)), "noise")
    env = convex_envelope(f)
    for k in range(f.support.n):
        assert env.values[k] == pytest.approx(lp_envelope(f.coords, f.values, f.coords[k]), abs=1e-8)


def test_envelope_is_below_and_convex():
    f = rand_uc(3, dim=1, step=2.0 ** -5)
    env = convex_envelope(f)
    assert np.all(env.values[f.dom] <= f.values[f.dom] + 1e-12)
    assert delta_modulus(env, f.support.unit).delta >= -1e-12


def test_active_sets_reproduce_envelope():
    f = ex26(step=2.0 ** -4)
    res = convex_envelope(f, with_active=True)
    for k, a in enumerate(res.active_sets):
        if a is None:
            continue
        pts, w = a
        assert w.sum() == pytest.approx(1.0)
        assert np.allclose(w @ f.coords[pts], f.coords[k])
        assert w @ f.values[pts] == pytest.approx(res.envelope.values[k], abs=1e-12)


def test_lower_planes_reproduce_envelope():
    f = tabulate(box_grid(-1.0, 1.0, 0.25, 2), lambda c: np.abs(c).sum(axis=1) ** 1.5, "p")
    S, c = lower_planes(f.coords, f.values)
    env = convex_envelope(f)
    assert np.allclose((f.coords @ S.T + c).max(axis=1), env.values, atol=1e-9)


def test_local_envelope_reduction_1d():
    f = ex26(step=2.0 ** -5, lo=-1.0, hi=1.0)
    env = convex_envelope(f)
    d = delta_modulus(f, 1.0).delta
    assert d > 0
    for x in f.coords[::4]:
        assert local_envelope_reduction(f, x, 1.0) == pytest.approx(env(x), abs=1e-12)

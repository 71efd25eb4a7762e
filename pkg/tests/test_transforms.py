import numpy as np
import pytest

from uniconvex import (PreconditionError, box_grid, delta_modulus, domain_enlargement,
                       exp_transform, inf_convolution, interval_grid, lipschitz_regularization,
                       lp_norm, square_transform, tabulate)
from uniconvex.transforms import exp_gap_bound, lipschitz_constant


def test_inf_convolution_matches_brute_force():
    rng = np.random.default_rng(1)
    f1 = tabulate(interval_grid(0.0, 1.0, 0.125), lambda c: rng.random(len(c)), "a")
    f2 = tabulate(interval_grid(-0.5, 0.5, 0.125), lambda c: c[:, 0] ** 2, "b")
    h = inf_convolution(f1, f2)
    for k, x in enumerate(h.coords[:, 0]):
        best = min(f1.values[i] + f2.values[j] for i, a in enumerate(f1.coords[:, 0])
                   for j, b in enumerate(f2.coords[:, 0]) if abs(a + b - x) < 1e-12)
        assert h.values[k] == pytest.approx(best)


def test_inf_convolution_of_quadratics():
    # x^2 box y^2 = x^2 / 2 at lattice points with an exact split
    g = interval_grid(-1.0, 1.0, 0.125)
    q = tabulate(g, lambda c: c[:, 0] ** 2, "q")
    h = inf_convolution(q, q)
    x = h.coords[:, 0]
    even = np.isclose(np.round(x / 0.25) * 0.25, x)
    assert np.allclose(h.values[even], x[even] ** 2 / 2)


def test_exp_transform_gap():
    f = tabulate(interval_grid(0.0, 1.0, 2.0 ** -4), lambda c: c[:, 0], "id")
    g = exp_transform(f, 0.5)
    assert np.allclose(g.values, 3.0 ** (2 * f.values))
    assert exp_gap_bound(f, 0.5) == 0.5
    with pytest.raises(PreconditionError):
        exp_transform(f, 0.0)


def test_lipschitz_regularization_is_c_lipschitz():
    f = tabulate(interval_grid(-1.0, 1.0, 2.0 ** -4), lambda c: 5 * c[:, 0] ** 2, "q")
    g = lipschitz_regularization(f, None, 2.0)
    assert lipschitz_constant(g) <= 2.0 + 1e-12
    assert np.all(g.values <= f.values + 1e-12)
    x = g.coords[:, 0]
    assert np.allclose(g.values[np.abs(x) <= 0.2], f.values[np.abs(x) <= 0.2])


def test_domain_enlargement_uses_open_ball():
    f = tabulate(box_grid(-1.0, 1.0, 0.25, 2), lambda c: c[:, 0] + 2 * c[:, 1], "lin")
    g = domain_enlargement(f, 0.3, lp_norm(2, "inf"))
    assert g((0.0, 0.0)) == pytest.approx(-0.75)
    g = domain_enlargement(f, 0.25, lp_norm(2, "inf"))
    assert g((0.0, 0.0)) == pytest.approx(0.0)


def test_square_transform_keeps_uniform_convexity():
    f = tabulate(interval_grid(-1.0, 1.0, 2.0 ** -4), lambda c: np.abs(c[:, 0]) + 1, "abs")
    sq = square_transform(f)
    assert delta_modulus(sq, 0.5).delta > 0
    with pytest.raises(PreconditionError):
        square_transform(f.with_values(f.values - 2))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uniconvex import (PreconditionError, check_gage_scaling, check_t_interpolation,
                       delta_modulus, gage, interval_grid, lp_norm, quasi_modulus, tabulate)
from uniconvex.fixtures import ex26, ex211, rand_convex
from conftest import brute_modulus


def test_square_modulus_is_quarter_eps_squared(square_1d):
    for eps in (0.25, 0.5, 1.0):
        assert delta_modulus(square_1d, eps).delta == pytest.approx(eps ** 2 / 4, abs=1e-12)


def test_modulus_matches_brute_force_2d(paraboloid_2d):
    f = paraboloid_2d
    for p in (1, 2, "inf"):
        norm = lp_norm(2, p)
        for eps in (0.5, 1.0):
            got = delta_modulus(f, eps, norm).delta
            assert got == pytest.approx(brute_modulus(f.coords, f.values, eps, norm), abs=1e-12)


def test_nonconvex_example_modulus():
    f = ex26(step=2.0 ** -6)
    rep = delta_modulus(f, 1.0)
    assert rep.delta == pytest.approx(1 / 36, abs=1e-9)
    assert rep.witness is not None


def test_quasi_modulus_of_broken_line():
    f = ex211(step=2.0 ** -4)
    got = quasi_modulus(f, 0.5).delta
    norm = lp_norm(1, 2)
    assert got == pytest.approx(brute_modulus(f.coords, f.values, 0.5, norm, quasi=True), abs=1e-12)
    assert got > 0
    assert delta_modulus(f, 0.5).delta < 0


def test_eps_must_be_positive(square_1d):
    with pytest.raises(PreconditionError):
        delta_modulus(square_1d, 0.0)


def test_gage_of_square_is_eps_squared_scale(square_1d):
    # (1-t)x^2 + t y^2 - ((1-t)x + t y)^2 = t(1-t)(x-y)^2
    assert gage(square_1d, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert gage(square_1d, 0.5) == pytest.approx(0.25, abs=1e-12)


def test_gage_rejects_nonconvex():
    with pytest.raises(PreconditionError):
        gage(ex26(step=2.0 ** -4), 1.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), eps=st.sampled_from([0.25, 0.5, 1.0]))
def test_gage_sandwich(seed, eps):
    f = rand_convex(seed, step=2.0 ** -4)
    d = delta_modulus(f, eps).delta
    p = gage(f, eps)
    assert 2 * d - 1e-9 <= p <= 4 * d + 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_t_interpolation_and_scaling(seed):
    f = rand_convex(seed, step=2.0 ** -4)
    assert check_t_interpolation(f, 0.5)["holds"]
    assert all(r["holds"] for r in check_gage_scaling(f, 0.25, [1.0, 2.0, 3.0])["rows"])

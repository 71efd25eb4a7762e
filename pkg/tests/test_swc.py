import pytest
from hypothesis import given, settings, strategies as st

from uniconvex import chain_check, lp_norm, measure_suite, threshold_bracket
from uniconvex.fixtures import linf_ball
from uniconvex.swc import default_caps


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.1, 2.4), steps=st.integers(0, 5))
def test_bracket_contains_monotone_threshold(t, steps):
    grid = [0.25, 0.5, 1.0, 1.5, 2.0, 2.5]
    lo, hi, flags = threshold_bracket(lambda e: e >= t, grid, steps)
    assert lo < t <= hi
    assert not flags["no_success"]


def test_bracket_ignores_inconclusive():
    lo, hi, flags = threshold_bracket(lambda e: None if e < 1 else True, [0.5, 1.0], 2)
    assert lo == 0.0 and hi == 1.0
    assert flags["untested_below"] and flags["inconclusive"]


def test_bracket_without_success():
    lo, hi, flags = threshold_bracket(lambda e: False, [0.5, 1.0], 2)
    assert lo == 1.0 and hi == float("inf") and flags["no_success"]


def test_linked_caps():
    caps = default_caps(3)
    assert caps["sequence"] == 16 and caps["dz"] == 4 and caps["half_dz"] == 16


def test_chain_on_coarse_ball():
    f = linf_ball(step=0.25)
    rep = measure_suite(f.support, f.dom, lp_norm(2, "inf"), (0.5, 1.0, 1.5, 2.0, 2.5),
                        {"budget": 2000}, steps=2, fixture="linf_ball")
    assert chain_check(rep)["holds"]

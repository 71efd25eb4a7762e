from functools import lru_cache

import numpy as np
import pytest

from uniconvex import (box_grid, convex_separation_sequence, height_function, interval_grid,
                       lp_norm, max_separated_tree_height)
from uniconvex.trees import hull_distance, sequence_separated, tree_separation_check


def brute_heights(coords, eps, norm):
    """Height recursion over exact midpoints, computed independently."""
    index = {tuple(np.round(c, 12)): k for k, c in enumerate(coords)}
    n = len(coords)
    pairs = {k: [] for k in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if norm(coords[i] - coords[j]) >= eps - 1e-12:
                m = index.get(tuple(np.round((coords[i] + coords[j]) / 2, 12)))
                if m is not None:
                    pairs[m].append((i, j))

    @lru_cache(None)
    def h(k, depth=0):
        if depth > n:
            return n
        best = 0
        for i, j in pairs[k]:
            best = max(best, 1 + min(h(i, depth + 1), h(j, depth + 1)))
        return best

    return np.array([h(k) for k in range(n)])


@pytest.mark.parametrize("eps,expected", [(1.0, 1), (0.5, 2), (1.01, 0), (1.5, 0)])
def test_interval_heights(eps, expected):
    s = interval_grid(0.0, 1.0, 0.125).support
    res = max_separated_tree_height(s, eps)
    assert res["height"] == expected
    assert tree_separation_check(res["witness"], eps)


@pytest.mark.parametrize("p", [1, 2, "inf"])
def test_heights_match_recursion_2d(p):
    s = box_grid(-1.0, 1.0, 0.25, 2).support
    norm = lp_norm(2, p)
    f = height_function(s, 0.5, norm)
    assert np.array_equal(-f.values, brute_heights(s.coords, 0.5, norm))


def test_hull_distance_against_points():
    norm = lp_norm(2, 2)
    P = np.array([[0.0, 0.0], [1.0, 0.0]])
    Q = np.array([[0.5, 2.0], [3.0, 3.0]])
    assert hull_distance(P, Q, norm) == pytest.approx(2.0)
    assert hull_distance(P, np.array([[0.5, 0.0]]), norm) == pytest.approx(0.0, abs=1e-12)


def test_separation_sequence_on_interval():
    pts = interval_grid(0.0, 1.0, 0.125).support.coords
    norm = lp_norm(1, 2)
    r = convex_separation_sequence(pts, 0.25, 4, norm)
    assert r["witness"] is not None
    assert sequence_separated(np.asarray(r["witness"]), 0.25, norm)
    r = convex_separation_sequence(pts, 0.5, 4, norm)
    assert r["witness"] is None and r["exhaustive"]

import numpy as np
import pytest

from uniconvex import box_grid, interval_grid, tabulate


def brute_modulus(coords, values, eps, norm, quasi=False):
    """O(n^3) midpoint-gap infimum used as an independent oracle."""
    best = np.inf
    index = {tuple(np.round(c, 12)): k for k, c in enumerate(coords)}
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            if not (np.isfinite(values[i]) and np.isfinite(values[j])):
                continue
            if norm(coords[i] - coords[j]) < eps - 1e-12:
                continue
            m = index.get(tuple(np.round((coords[i] + coords[j]) / 2, 12)))
            if m is None or not np.isfinite(values[m]):
                continue
            top = max(values[i], values[j]) if quasi else (values[i] + values[j]) / 2
            best = min(best, top - values[m])
    return best


@pytest.fixture
def square_1d():
    return tabulate(interval_grid(-1.0, 1.0, 0.125), lambda c: c[:, 0] ** 2, "sq")


@pytest.fixture
def paraboloid_2d():
    return tabulate(box_grid(-1.0, 1.0, 0.25, 2), lambda c: (c ** 2).sum(axis=1), "p2")

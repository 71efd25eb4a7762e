import numpy as np
import pytest

from uniconvex import (PreconditionError, box_grid, delta_modulus, derive_once, dz_index,
                       interval_grid, lp_norm, uc_function_from_derivation)
from uniconvex.dentability import default_dictionary


def brute_derive(coords, mask, eps, W, norm):
    """Remove the union of all dictionary caps of diameter at most eps."""
    out = mask.copy()
    X = coords[mask]
    for w in W:
        p = X @ w
        for t in np.unique(p):
            cap = X[p >= t - 1e-12]
            diam = max((norm(a - b) for a in cap for b in cap), default=0.0)
            if diam <= eps + 1e-12:
                out &= ~(mask & (coords @ w >= t - 1e-12))
    return out


@pytest.mark.parametrize("eps", [0.3, 0.5, 0.8])
def test_derive_once_matches_brute_force(eps):
    s = box_grid(0.0, 1.0, 0.25, 2).support
    W = default_dictionary(2, 8)
    norm = lp_norm(2, 2)
    mask = np.ones(s.n, bool)
    for _ in range(3):
        got = derive_once(s, mask, eps, W, norm)
        assert np.array_equal(got, brute_derive(s.coords, mask, eps, W, norm))
        mask = got
        if not mask.any():
            break


def test_interval_index():
    s = interval_grid(0.0, 1.0, 0.0625).support
    trace = dz_index(s, None, 0.3)
    assert trace.dz == 2
    assert [int(st.sum()) for st in trace.stages][-1] == 0


def test_index_is_monotone_in_eps():
    s = box_grid(0.0, 1.0, 0.125, 2).support
    dz = [dz_index(s, None, e).dz for e in (0.3, 0.5, 0.8)]
    assert all(isinstance(d, int) for d in dz), dz
    assert dz[0] >= dz[1] >= dz[2] >= 1


def test_cap_must_be_positive():
    s = interval_grid(0.0, 1.0, 0.25).support
    with pytest.raises(PreconditionError):
        dz_index(s, None, 0.3, cap=0)


def test_uc_function_from_derivation():
    s = interval_grid(0.0, 1.0, 0.0625).support
    out = uc_function_from_derivation(s, None, 0.7)
    phi, delta = out[0], out[1]
    assert delta > 0
    assert delta_modulus(phi, 0.7).delta >= delta - 1e-12

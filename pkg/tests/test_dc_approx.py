import numpy as np
import pytest

from uniconvex import cepedello_approx, dc_bounds_check
from uniconvex.dc_approx import dc_error_report
from uniconvex.fixtures import ex26


@pytest.fixture(scope="module")
def small_ex26():
    return ex26(step=2.0 ** -5, lo=-1.0, hi=1.0)


def test_dc_approximation_within_eps(small_ex26):
    f = small_ex26
    g, dc, err = cepedello_approx(f, None, 0.2)
    assert err <= 0.2
    # independent sup-norm check of |f - (u - v)| on the domain
    diff = np.abs(f.values[f.dom] - (dc.u.values - dc.v.values)[f.dom])
    assert diff.max() == pytest.approx(err, abs=1e-12)
    assert dc_error_report(f, g) == pytest.approx(err, abs=1e-12)
    conv = dc.convexity()
    assert conv["u_defect"] >= -1e-9 and conv["v_defect"] >= -1e-9


def test_dc_bounds(small_ex26):
    assert dc_bounds_check(small_ex26, None)["holds"]

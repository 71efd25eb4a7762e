import numpy as np
import pytest

from uniconvex import PreconditionError, enflo_pipeline, box_grid, lp_norm, renorm_from_function
from uniconvex.fixtures import disc_quadratic, ex26
from uniconvex.renorming import implication_scan, zeta_from_lambda


@pytest.fixture(scope="module")
def renormed():
    f = disc_quadratic(0.25)
    return f, renorm_from_function(f, None, 0.5, lp_norm(2, 2))


def test_renorm_is_a_norm(renormed):
    _, c = renormed
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(2, 200, 2))
    assert np.all(c(x + y) <= c(x) + c(y) + 1e-9)
    assert np.allclose(c(-3.0 * x), 3.0 * c(x))
    assert float(c(np.zeros((1, 2)))[0]) == pytest.approx(0.0, abs=1e-12)


def test_renorm_equivalent_to_base(renormed):
    _, c = renormed
    a, b = c.equivalence(lp_norm(2, 2))
    assert 0 < a <= b < np.inf


def test_implication_holds(renormed):
    f, c = renormed
    assert implication_scan(f, c, c.zeta, 0.5)["holds"]


def test_zeta_positive():
    assert zeta_from_lambda(0.25) > 0


def test_renorm_rejects_nonconvex():
    with pytest.raises(PreconditionError):
        renorm_from_function(ex26(step=2.0 ** -4, lo=-1.0, hi=1.0), None, 0.5, lp_norm(1, 2))


def test_enflo_pipeline_small():
    r = enflo_pipeline(lp_norm(2, "inf"), box_grid(-1.0, 1.0, 0.125, 2), [0.5], cap=64)
    assert r["input_modulus"][0.5] == pytest.approx(0.0, abs=1e-12)
    assert r["output_modulus"][0.5] > 0
    x = np.random.default_rng(1).normal(size=(50, 2))
    g = r["final_norm"]
    assert np.allclose(g(2.0 * x), 2.0 * g(x))
    assert np.all(g(x) > 0)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cogfuse.gradcheck import NonFiniteEvaluationError, check_grads, finite_diff_grad
from cogfuse.numeric import ShapeError


def test_sum_of_squares():
    g = finite_diff_grad(lambda x: float(np.sum(x**2)), [1.0, 2.0], 1e-5)
    np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-8)


def test_constant():
    np.testing.assert_allclose(finite_diff_grad(lambda x: 3.0, np.ones(4)), 0.0, atol=1e-10)


def test_exp():
    g = finite_diff_grad(lambda x: math.exp(x[0]), [0.0])
    assert abs(g[0] - 1.0) <= 1e-9


def test_matrix_shape_preserved():
    x = np.arange(6.0).reshape(2, 3)
    g = finite_diff_grad(lambda z: float((z**2).sum()), x)
    assert g.shape == (2, 3)
    np.testing.assert_allclose(g, 2 * x, atol=1e-8)


def test_non_finite_names_coordinate():
    with pytest.raises(NonFiniteEvaluationError) as exc:
        finite_diff_grad(lambda x: math.inf if x[1] != 0.0 else float(x[0]), [1.0, 0.0])
    assert exc.value.index == 1


def test_bad_step():
    with pytest.raises(ValueError):
        finite_diff_grad(lambda x: 0.0, [1.0], h=0.0)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4),
       st.floats(-3, 3), st.floats(1e-6, 1e-4))
def test_quadratics_exact(coeffs, c, h):
    a = np.array(coeffs)
    x0 = np.linspace(-1, 1, len(a))

    def f(x):
        return float(np.sum(a * x**2) + c * x.sum() + 1.0)

    np.testing.assert_allclose(finite_diff_grad(f, x0, h), 2 * a * x0 + c, atol=1e-8)


class TestCheckGrads:
    def test_identical(self):
        r = check_grads([1.0, -2.0], [1.0, -2.0])
        assert r.passed and r.max_rel_err == 0.0

    def test_boundary_pass(self):
        assert check_grads([1.0], [1.00005], tol_rel=1e-4).passed

    def test_fail(self):
        r = check_grads([1.0], [1.1], tol_rel=1e-4, tol_abs=1e-7)
        assert not r.passed and r.worst_index == 0

    def test_absolute_floor(self):
        r = check_grads([1e-9], [3e-9], tol_rel=1e-4, tol_abs=1e-7)
        assert r.max_rel_err > 1e-4 and r.passed

    def test_worst_index(self):
        assert check_grads([1.0, 2.0, 3.0], [1.0, 2.5, 3.0]).worst_index == 1

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            check_grads([1.0], [1.0, 2.0])

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from geninv_leaves.core.critpoint import (
    ConstraintSpec,
    best_rank_approximation,
    criticality_residual,
    matrix_constraint,
    rank_preserving_neighbor,
    sweep_candidates,
)
from geninv_leaves.core.errors import DegenerateConstraintWarning, InvalidInputError
from geninv_leaves.core.frobenius import alpha_field_kernel, integrate_leaf, kernel_family, leaf_problem
from geninv_leaves.core.geninv import moore_penrose_geninv
from geninv_leaves.core.linalg import SubspaceBasis, numerical_rank

from conftest import rank_matrix

HALF = np.sqrt(0.5)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None, derandomize=True)
def test_eckart_young_point_is_critical(seed):
    rng = np.random.default_rng(seed)
    b = rank_matrix(rng, 5, 4, 4, smin=0.5, smax=4.0)
    x = best_rank_approximation(b, 2)
    at_x = criticality_residual(matrix_constraint(x, b))
    neighbor = rank_preserving_neighbor(x, 2, 1e-2, seed=seed)
    assert numerical_rank(neighbor) == 2
    at_neighbor = criticality_residual(matrix_constraint(neighbor, b))
    assert at_x <= 1e-8
    assert at_neighbor >= 100 * max(at_x, 1e-12)


def test_neighbor_distance(rng):
    x = rank_matrix(rng, 6, 4, 2)
    y = rank_preserving_neighbor(x, 2, 1e-3, seed=3)
    assert np.linalg.norm(y - x) == pytest.approx(1e-3, rel=1e-2)


def test_circle_residuals():
    tangent = SubspaceBasis(2, [[-HALF], [HALF]])
    spec = ConstraintSpec(tangent, [HALF, HALF], [0.0, 1.0])
    assert criticality_residual(spec) == pytest.approx(HALF / 2, rel=1e-15)
    top = ConstraintSpec(SubspaceBasis(2, [[1.0], [0.0]]), [0.0, 1.0], [0.0, 1.0])
    assert criticality_residual(top) == 0.0


def test_zero_gradient_is_critical():
    spec = ConstraintSpec(SubspaceBasis(3, np.eye(3)[:, :2]), np.zeros(3), np.zeros(3))
    assert criticality_residual(spec) == 0.0


def test_residual_ignores_tangent_basis_choice():
    g = np.array([0.3, -1.2, 2.0])
    a = ConstraintSpec(SubspaceBasis(3, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]), np.zeros(3), g)
    b = ConstraintSpec(SubspaceBasis(3, [[1.0, 1.0], [2.0, -1.0], [0.0, 0.0]]), np.zeros(3), g)
    assert criticality_residual(a) == pytest.approx(criticality_residual(b), rel=1e-14)


def test_empty_tangent_space_warns():
    spec = ConstraintSpec(SubspaceBasis.zero(2), [0.0, 1.0], [1.0, 1.0])
    with pytest.warns(DegenerateConstraintWarning):
        assert criticality_residual(spec) == 0.0


def test_constraint_shape_mismatch():
    with pytest.raises(InvalidInputError):
        ConstraintSpec(SubspaceBasis(2, [[1.0], [0.0]]), [0.0, 1.0, 2.0], [1.0, 0.0])


def test_best_rank_approximation():
    b = np.diag([3.0, 2.0, 1.0])
    assert_allclose(best_rank_approximation(b, 2), np.diag([3.0, 2.0, 0.0]), atol=1e-14)
    with pytest.raises(InvalidInputError):
        best_rank_approximation(b, 4)


def test_sweep_finds_top_of_circle(circle_family):
    x0 = circle_family.base_point
    gi = moore_penrose_geninv(circle_family.jacobian(x0))
    field = alpha_field_kernel(circle_family.jacobian, x0, gi)
    problem = leaf_problem(x0, kernel_family(circle_family.jacobian, 2), gi.range_plus)
    leaf = integrate_leaf(problem, field, 0.5, step=1e-2, nodes=11)
    candidates = sweep_candidates(lambda p: p[1], lambda p: np.array([0.0, 1.0]), leaf)
    assert len(candidates) == 9
    best = candidates[0]
    assert best.point[0] == pytest.approx(0.0, abs=1e-12)
    assert best.residual <= 1e-8
    assert best.value == pytest.approx(1.0, abs=1e-12)
    assert all(c.residual >= best.residual for c in candidates)

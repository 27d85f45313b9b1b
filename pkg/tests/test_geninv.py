import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from geninv_leaves.core.errors import (
    DegenerateSplitError,
    NoInverseInBallError,
    NotComplementaryError,
    OutOfBallError,
)
from geninv_leaves.core.geninv import (
    axiom_residuals,
    combined_inverse,
    condition_report,
    construct_geninv,
    geninv_independence_check,
    independence_radius,
    locally_fine_detect,
    moore_penrose_geninv,
    perturbation_context,
    perturbation_projections,
    perturbed_inverse,
    rank_class_preserved,
)
from geninv_leaves.core.linalg import SubspaceBasis, null_space, range_space, spectral_norm

from conftest import factor_perturbation, rank_matrix, random_complement

SEEDS = st.integers(0, 2**32 - 1)

E1 = SubspaceBasis(2, [[1.0], [0.0]])
E2 = SubspaceBasis(2, [[0.0], [1.0]])


def random_geninv(rng, m, n, r):
    a = rank_matrix(rng, m, n, r)
    range_plus = random_complement(rng, null_space(a))
    null_plus = random_complement(rng, range_space(a))
    return construct_geninv(a, range_plus, null_plus)


def perturbation_in_ball(rng, gi, r):
    """T in the ball around A; rank-preserving on even draws, generic on odd ones."""
    a = gi.a
    radius = gi.ball_radius()
    if rng.integers(2) == 0:
        size = 0.5
        t = factor_perturbation(rng, a, r, size)
        while np.linalg.norm(t - a, 2) >= 0.9 * radius:
            size /= 2.0
            t = factor_perturbation(rng, a, r, size)
        return t
    e = rng.standard_normal(a.shape)
    e /= np.linalg.norm(e, 2)
    return a + rng.uniform(0.2, 0.9) * radius * e


def test_construct_worked_example(diag10):
    gi = construct_geninv(diag10, E1, E2)
    assert_allclose(gi.a_plus, np.diag([1.0, 0.0]), atol=1e-15)
    assert max(axiom_residuals(gi)) <= 1e-12


def test_construct_oblique_complement(diag10):
    gi = construct_geninv(diag10, SubspaceBasis(2, [[1.0], [1.0]]), E2)
    assert_allclose(gi.a_plus, [[1.0, 0.0], [1.0, 0.0]], atol=1e-14)


def test_construct_invertible_gives_inverse(rng):
    a = rank_matrix(rng, 4, 4, 4)
    gi = construct_geninv(a, SubspaceBasis.full(4), SubspaceBasis.zero(4))
    assert_allclose(gi.a_plus, np.linalg.inv(a), atol=1e-12)


def test_construct_zero_operator():
    gi = construct_geninv(np.zeros((2, 3)), SubspaceBasis.zero(3), SubspaceBasis.full(2))
    assert_allclose(gi.a_plus, np.zeros((3, 2)))
    assert gi.ball_radius() == float("inf")


def test_construct_rejects_non_complements(diag10):
    with pytest.raises(NotComplementaryError):
        construct_geninv(diag10, E2, E2)
    with pytest.raises(NotComplementaryError):
        construct_geninv(diag10, E1, E1)


def test_construct_degenerate_split():
    # range_plus tilted almost onto N(A)
    a = np.diag([1.0, 0.0])
    nearly_kernel = SubspaceBasis(2, [[1e-14], [1.0]])
    with pytest.raises((DegenerateSplitError, NotComplementaryError)):
        construct_geninv(a, nearly_kernel, E2)


@given(SEEDS)
@settings(max_examples=500, deadline=None, derandomize=True)
def test_axioms_on_random_complements(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    r = int(rng.integers(1, min(m, n) + 1))
    gi = random_geninv(rng, m, n, r)
    first, second = axiom_residuals(gi)
    assert first <= 1e-10 * np.linalg.norm(gi.a_plus, 2)
    assert second <= 1e-10 * np.linalg.norm(gi.a, 2)


@given(SEEDS)
@settings(max_examples=200, deadline=None, derandomize=True)
def test_orthogonal_complements_give_pseudoinverse(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    a = rank_matrix(rng, m, n, int(rng.integers(1, min(m, n) + 1)))
    pinv = np.linalg.pinv(a)
    assert np.linalg.norm(moore_penrose_geninv(a).a_plus - pinv, 2) <= 1e-10 * max(np.linalg.norm(pinv, 2), 1.0)


def test_conditions_at_t_equal_a(rng):
    gi = random_geninv(rng, 5, 4, 2)
    report = condition_report(perturbation_context(gi, gi.a))
    assert all(report.values())


def test_conditions_rank_preserving_worked_example(diag10):
    gi = construct_geninv(diag10, E1, E2)
    report = condition_report(perturbation_context(gi, [[1.0, 0.1], [0.0, 0.0]]))
    assert report.values() == (True,) * 7


def test_conditions_rank_jump_worked_example(diag10):
    gi = construct_geninv(diag10, E1, E2)
    report = condition_report(perturbation_context(gi, np.diag([1.0, 0.25])))
    assert report.values() == (False,) * 7


def test_conditions_out_of_ball(diag10):
    gi = construct_geninv(diag10, E1, E2)
    with pytest.raises(OutOfBallError) as info:
        condition_report(perturbation_context(gi, np.diag([1.0, 1.0])))
    assert info.value.radius == pytest.approx(1.0)


@given(SEEDS)
@settings(max_examples=1000, deadline=None, derandomize=True)
def test_seven_conditions_agree_and_match_rank_class(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 13)), int(rng.integers(1, 11))
    r = int(rng.integers(1, min(m, n) + 1))
    gi = random_geninv(rng, m, n, r)
    ctx = perturbation_context(gi, perturbation_in_ball(rng, gi, r))
    report = condition_report(ctx)
    assert report.consistent, report.values()
    assert rank_class_preserved(ctx) == report.range_misses_null_plus


def test_perturbed_inverse_at_a(rng):
    gi = random_geninv(rng, 4, 5, 3)
    b = perturbed_inverse(perturbation_context(gi, gi.a))
    assert_allclose(b.a_plus, gi.a_plus, atol=1e-14)


def test_perturbed_inverse_worked_example(diag10):
    gi = construct_geninv(diag10, E1, E2)
    t = np.array([[1.0, 0.1], [0.0, 0.0]])
    b = perturbed_inverse(perturbation_context(gi, t))
    assert max(axiom_residuals(b)) <= 1e-14
    assert_allclose(b.a_plus, [[1.0, 0.0], [0.0, 0.0]], atol=1e-15)


def test_perturbed_inverse_two_forms_agree(rng):
    gi = random_geninv(rng, 6, 5, 3)
    ctx = perturbation_context(gi, factor_perturbation(rng, gi.a, 3, 1e-2))
    b = perturbed_inverse(ctx)
    gap = spectral_norm(b.a_plus - np.linalg.solve(ctx.d_map, gi.a_plus))
    assert gap <= 1e-10 * spectral_norm(b.a_plus)


def test_perturbed_inverse_rejects_rank_jump(diag10):
    gi = construct_geninv(diag10, E1, E2)
    with pytest.raises(NoInverseInBallError):
        perturbed_inverse(perturbation_context(gi, np.diag([1.0, 1e-3])))


def test_rank_class_examples(diag10):
    gi = construct_geninv(diag10, E1, E2)
    assert rank_class_preserved(perturbation_context(gi, diag10))
    assert not rank_class_preserved(perturbation_context(gi, np.diag([1.0, 1e-4])))


def test_perturbation_projections_rank_preserving(diag10):
    gi = construct_geninv(diag10, E1, E2)
    proj = perturbation_projections(perturbation_context(gi, [[1.0, 0.2], [0.3, 0.06]]))
    assert proj.p1_idempotency <= 1e-14 and proj.p2_idempotency <= 1e-14
    assert proj.extra_kernel.dim == 0
    assert proj.p1_range_is_range_plus and proj.p2_kernel_is_null_plus
    assert proj.codomain_split and proj.domain_split


def test_perturbation_projections_rank_jump(diag10):
    gi = construct_geninv(diag10, E1, E2)
    proj = perturbation_projections(perturbation_context(gi, np.diag([1.0, 1e-3])))
    assert proj.extra_kernel.dim == 1


@given(SEEDS)
@settings(max_examples=50, deadline=None, derandomize=True)
def test_perturbed_inverse_is_lipschitz_in_s(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 8)), int(rng.integers(2, 8))
    r = int(rng.integers(1, min(m, n) + 1))
    a = rank_matrix(rng, m, n, r)
    gi = moore_penrose_geninv(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    # moving only the left factor keeps rank r along the whole segment
    direction = rng.standard_normal((m, r)) @ vt[:r]
    norm_plus, norm_dir = np.linalg.norm(gi.a_plus, 2), np.linalg.norm(direction, 2)
    s_max = 0.9 / norm_plus / norm_dir

    def gap(step):
        ctx = perturbation_context(gi, a + step * direction)
        return np.linalg.norm(perturbed_inverse(ctx).a_plus - gi.a_plus, 2)

    for step in s_max * np.linspace(0.05, 1.0, 10):
        bound = step * norm_plus ** 2 * norm_dir / (1.0 - step * norm_plus * norm_dir)
        assert gap(step) <= bound * (1.0 + 1e-8) + 1e-13

    ratios = [gap(step) / step for step in s_max * np.linspace(0.02, 1.0 / 3.0, 12)]
    assert max(ratios) <= 2.0 * min(ratios)


def test_locally_fine_constant_family(diag10):
    gi = construct_geninv(diag10, E1, E2)
    result = locally_fine_detect(lambda x: diag10, np.zeros(2), gi, radius=0.1, samples=16)
    assert result.fine
    assert max(result.distances) == 0.0


def test_locally_fine_constant_rank_jacobian():
    # f(x, y) = (x, 0) has Jacobian diag(1, 0) everywhere
    jac = lambda p: np.array([[1.0, 0.0], [0.0, 0.0]])
    gi = moore_penrose_geninv(jac(np.zeros(2)))
    assert locally_fine_detect(jac, np.zeros(2), gi, radius=0.5, samples=32).fine


def test_locally_fine_detects_rank_jump(diag10):
    gi = construct_geninv(diag10, E1, E2)
    result = locally_fine_detect(lambda x: np.diag([1.0, x[0]]), np.zeros(1), gi, radius=0.1, samples=16)
    assert not result.fine
    assert result.witness is not None and result.witness[0] != 0.0


def test_locally_fine_is_seeded():
    jac = lambda p: np.array([[1.0 + p[0], p[1]]])
    gi = moore_penrose_geninv(jac(np.zeros(2)))
    first = locally_fine_detect(jac, np.zeros(2), gi, radius=0.1, samples=8, seed=3)
    second = locally_fine_detect(jac, np.zeros(2), gi, radius=0.1, samples=8, seed=3)
    assert_allclose(first.samples, second.samples)


def test_independence_at_a(rng):
    a = rank_matrix(rng, 4, 3, 2)
    gi1 = moore_penrose_geninv(a)
    gi2 = construct_geninv(a, random_complement(rng, null_space(a)), random_complement(rng, range_space(a)))
    assert geninv_independence_check(a, gi1, gi2, a)


def test_independence_worked_example(diag10):
    orthogonal = construct_geninv(diag10, E1, E2)
    oblique = construct_geninv(diag10, SubspaceBasis(2, [[1.0], [1.0]]), E2)
    assert geninv_independence_check(diag10, orthogonal, oblique, [[1.0, 0.05], [0.0, 0.0]])


def test_combined_inverse_complements(diag10):
    orthogonal = construct_geninv(diag10, E1, E2)
    oblique = construct_geninv(diag10, SubspaceBasis(2, [[1.0], [1.0]]), E2)
    b = combined_inverse(oblique, orthogonal)
    assert max(axiom_residuals(b)) <= 1e-14
    assert independence_radius(oblique, orthogonal) <= oblique.ball_radius()


@given(SEEDS)
@settings(max_examples=500, deadline=None, derandomize=True)
def test_independence_fuzz(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    r = int(rng.integers(1, min(m, n) + 1))
    a = rank_matrix(rng, m, n, r)
    gi1 = construct_geninv(a, random_complement(rng, null_space(a)), random_complement(rng, range_space(a)))
    gi2 = construct_geninv(a, random_complement(rng, null_space(a)), random_complement(rng, range_space(a)))
    delta = independence_radius(gi1, gi2)
    e = rng.standard_normal(a.shape)
    t = a + rng.uniform(0.05, 0.9) * delta * e / np.linalg.norm(e, 2)
    assert geninv_independence_check(a, gi1, gi2, t)

"""Shared builders for the test suite."""
from pathlib import Path

import numpy as np
import pytest

from geninv_leaves.core.families import circle, sphere
from geninv_leaves.core.linalg import SubspaceBasis, null_space

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def rank_matrix(rng: np.random.Generator, m: int, n: int, r: int,
                smin: float = 1.0, smax: float = 3.0) -> np.ndarray:
    """m x n matrix of rank r with singular values in [smin, smax]."""
    u, _ = np.linalg.qr(rng.standard_normal((m, m)))
    v, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = rng.uniform(smin, smax, r)
    return (u[:, :r] * s) @ v[:, :r].T


def gaussian_rank(rng: np.random.Generator, m: int, n: int, r: int) -> np.ndarray:
    """Product of m x r and r x n Gaussian factors."""
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, n))


def random_complement(rng: np.random.Generator, subspace: SubspaceBasis,
                      skew: float = 0.5) -> SubspaceBasis:
    """A complement of `subspace`: its orthogonal complement tilted into it."""
    n = subspace.ambient_dim
    ortho = null_space(subspace.basis.T) if subspace.dim else SubspaceBasis.full(n)
    if ortho.dim == 0 or subspace.dim == 0:
        return ortho
    tilt = subspace.basis @ (skew * rng.standard_normal((subspace.dim, ortho.dim)))
    return SubspaceBasis(n, ortho.basis + tilt)


def factor_perturbation(rng: np.random.Generator, x: np.ndarray, r: int, size: float) -> np.ndarray:
    """Rank-r matrix (L + sG)(R + sH)^T near the rank-r X = L R^T."""
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    left, right = u[:, :r] * s[:r], vt[:r].T
    g = rng.standard_normal(left.shape)
    h = rng.standard_normal(right.shape)
    return (left + size * g) @ (right + size * h).T


def elementary(m: int, n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((m, n))
    e[i, j] = 1.0
    return e


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def circle_family():
    return circle()


@pytest.fixture
def sphere_family():
    return sphere()


@pytest.fixture
def diag10():
    return np.diag([1.0, 0.0])

"""
Tolerant numerical primitives: rank, null space, range, complements and
oblique projections.

Subspaces are always stored with orthonormal bases; oblique structure lives in
SplitPair. Spaces of m x n operators are flattened column-major so the same
subspace machinery applies to them.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInputError, NotComplementaryError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10

Operator = np.ndarray


def as_operator(a, name: str = "operator") -> Operator:
    """
    Validate and return a dense real matrix.

    Args:
        a: Anything numpy can turn into a 2-D float array
        name: Used in error messages

    Returns:
        The matrix as a float ndarray with at least one row and one column
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must have rows >= 1 and cols >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Validate and return a finite 1-D float array."""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value; 0 for empty matrices."""
    if a.size == 0:
        return 0.0
    return float(sla.svdvals(a)[0])


def flatten(x: np.ndarray) -> np.ndarray:
    """Column-major vectorisation of an m x n matrix."""
    return np.asarray(x, dtype=float).reshape(-1, order="F")


def unflatten(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of flatten."""
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def _cutoff(singular_values: np.ndarray, shape: Tuple[int, int], tol: float,
            scale: Optional[float] = None) -> float:
    if scale is None:
        scale = float(singular_values[0]) if singular_values.size else 0.0
    return tol * scale * max(shape)


def _rank(m: np.ndarray, tol: float, scale: Optional[float] = None) -> int:
    if m.size == 0:
        return 0
    s = sla.svdvals(m)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > _cutoff(s, m.shape, tol, scale)))


def _canonical_signs(q: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    if q.size == 0:
        return q
    idx = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[idx, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    return q * signs


def _subspace_threshold(tol: float, n: int) -> float:
    return 100.0 * tol * max(n, 1)


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """
    A subspace of R^ambient_dim given by a basis matrix (ambient_dim x k).

    The stored basis is orthonormalised on construction by a QR factorisation
    with positive R-diagonal, so orthonormal input is kept as given and a
    single column keeps its orientation.
    """
    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        if int(self.ambient_dim) < 1:
            raise InvalidInputError(f"ambient_dim must be positive, got {self.ambient_dim}")
        arr = np.asarray(self.basis, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.size == 0:
            arr = np.zeros((self.ambient_dim, 0))
        if arr.ndim != 2 or arr.shape[0] != self.ambient_dim:
            raise InvalidInputError(
                f"basis shape {arr.shape} does not match ambient_dim {self.ambient_dim}"
            )
        if arr.shape[1] > self.ambient_dim:
            raise InvalidInputError("more basis columns than the ambient dimension")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("basis contains non-finite entries")
        if arr.shape[1] > 0:
            s = sla.svdvals(arr)
            if s[-1] <= DEFAULT_TOL * s[0] * max(arr.shape):
                raise InvalidInputError("basis columns are numerically dependent")
            q, r = sla.qr(arr, mode="economic")
            signs = np.sign(np.diag(r))
            signs[signs == 0] = 1.0
            arr = q * signs
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "ambient_dim", int(self.ambient_dim))
        object.__setattr__(self, "basis", arr)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace."""
        return self.basis @ self.basis.T

    @classmethod
    def zero(cls, ambient_dim: int) -> "SubspaceBasis":
        return cls(ambient_dim, np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "SubspaceBasis":
        return cls(ambient_dim, np.eye(ambient_dim))

    @classmethod
    def span(cls, columns, tol: float = DEFAULT_TOL,
             scale: Optional[float] = None) -> "SubspaceBasis":
        """
        Orthonormal basis of the column space of a possibly rank-deficient matrix.

        Args:
            columns: ambient_dim x p matrix
            tol: Relative rank tolerance
            scale: Reference magnitude for the cutoff (defaults to the largest
                singular value of columns)
        """
        m = np.asarray(columns, dtype=float)
        if m.ndim == 1:
            m = m.reshape(-1, 1)
        n = m.shape[0]
        if m.shape[1] == 0:
            return cls.zero(n)
        u, s, _ = sla.svd(m, full_matrices=False)
        if s[0] == 0.0:
            return cls.zero(n)
        r = int(np.sum(s > _cutoff(s, m.shape, tol, scale)))
        return cls(n, _canonical_signs(u[:, :r]))


@dataclass(frozen=True, eq=False)
class SplitPair:
    """Two complementary subspaces and the projection onto first along second."""
    first: SubspaceBasis
    second: SubspaceBasis
    projection_onto_first: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.first.ambient_dim

    @property
    def projection_onto_second(self) -> np.ndarray:
        return np.eye(self.ambient_dim) - self.projection_onto_first

    def coordinates(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients of x in the stacked basis [first | second]."""
        stacked = np.hstack([self.first.basis, self.second.basis])
        c = sla.solve(stacked, np.asarray(x, dtype=float))
        k = self.first.dim
        return c[:k], c[k:]

    def idempotency_residual(self) -> float:
        p = self.projection_onto_first
        return spectral_norm(p @ p - p)


def numerical_rank(a, tol: float = DEFAULT_TOL) -> int:
    """
    Count singular values above tol * sigma_max * max(rows, cols).

    Returns 0 for the zero matrix.
    """
    if tol <= 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    return _rank(as_operator(a), tol)


def null_space(a, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Orthonormal basis of {x : Ax = 0}, dimension cols - numerical_rank(A)."""
    a = as_operator(a)
    _, s, vt = sla.svd(a, full_matrices=True)
    r = 0 if s[0] == 0.0 else int(np.sum(s > _cutoff(s, a.shape, tol)))
    return SubspaceBasis(a.shape[1], _canonical_signs(vt[r:].T))


def range_space(a, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Orthonormal basis of the column space of A."""
    a = as_operator(a)
    u, s, _ = sla.svd(a, full_matrices=True)
    r = 0 if s[0] == 0.0 else int(np.sum(s > _cutoff(s, a.shape, tol)))
    return SubspaceBasis(a.shape[0], _canonical_signs(u[:, :r]))


def image_space(op: np.ndarray, subspace: SubspaceBasis,
                tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Span of op applied to a subspace, with the cutoff scaled by ||op||."""
    op = np.asarray(op, dtype=float)
    if op.shape[1] != subspace.ambient_dim:
        raise InvalidInputError("operator and subspace dimensions disagree")
    return SubspaceBasis.span(op @ subspace.basis, tol, scale=max(spectral_norm(op), 1e-300))


def _check_ambient(u: SubspaceBasis, v: SubspaceBasis) -> None:
    if u.ambient_dim != v.ambient_dim:
        raise InvalidInputError(
            f"ambient dimensions differ: {u.ambient_dim} vs {v.ambient_dim}"
        )


def intersection_dim(u: SubspaceBasis, v: SubspaceBasis, tol: float = DEFAULT_TOL) -> int:
    """dim U + dim V - rank[U | V]."""
    _check_ambient(u, v)
    return u.dim + v.dim - _rank(np.hstack([u.basis, v.basis]), tol)


def is_complement(u: SubspaceBasis, v: SubspaceBasis, tol: float = DEFAULT_TOL) -> bool:
    """True iff U + V is a direct sum equal to the ambient space."""
    _check_ambient(u, v)
    n = u.ambient_dim
    if u.dim + v.dim != n:
        return False
    return _rank(np.hstack([u.basis, v.basis]), tol) == n


def contains(u: SubspaceBasis, v: SubspaceBasis, tol: float = DEFAULT_TOL) -> bool:
    """True iff V is a subspace of U, by projection residual."""
    _check_ambient(u, v)
    if v.dim == 0:
        return True
    if v.dim > u.dim:
        return False
    residual = v.basis - u.basis @ (u.basis.T @ v.basis)
    return spectral_norm(residual) <= _subspace_threshold(tol, u.ambient_dim)


def same_subspace(u: SubspaceBasis, v: SubspaceBasis, tol: float = DEFAULT_TOL) -> bool:
    """Mutual containment."""
    return u.dim == v.dim and contains(u, v, tol) and contains(v, u, tol)


def oblique_projection(onto: SubspaceBasis, along: SubspaceBasis,
                       tol: float = DEFAULT_TOL) -> SplitPair:
    """
    The projection with range `onto` and kernel `along`.

    P = [onto | along] diag(I_k, 0) [onto | along]^-1

    Raises:
        NotComplementaryError: if the stacked basis is numerically singular
    """
    _check_ambient(onto, along)
    n = onto.ambient_dim
    if not is_complement(onto, along, tol):
        raise NotComplementaryError(
            f"subspaces of dims {onto.dim} and {along.dim} are not complementary in R^{n}"
        )
    k = onto.dim
    if k == 0:
        p = np.zeros((n, n))
    elif k == n:
        p = np.eye(n)
    else:
        stacked = np.hstack([onto.basis, along.basis])
        p = onto.basis @ sla.solve(stacked, np.eye(n))[:k]
    p.setflags(write=False)
    pair = SplitPair(onto, along, p)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"oblique projection onto dim {k} along dim {along.dim}, "
                     f"idempotency residual {pair.idempotency_residual():.2e}")
    return pair

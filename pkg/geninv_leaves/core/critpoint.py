"""
Constrained critical points: x0 is critical for f on S only if f'(x0)
annihilates the tangent space of S at x0.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateConstraintWarning, InvalidInputError
from .frobenius import LeafSample
from .linalg import DEFAULT_TOL, SubspaceBasis, as_operator, as_vector, flatten
from .rankmanifold import operator_point, tangent_space

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    tangent_basis: SubspaceBasis
    x0: np.ndarray
    gradient: np.ndarray

    def __post_init__(self):
        x0 = as_vector(self.x0, "x0")
        g = as_vector(self.gradient, "gradient")
        if x0.size != self.tangent_basis.ambient_dim or g.size != x0.size:
            raise InvalidInputError(
                f"tangent basis in R^{self.tangent_basis.ambient_dim}, point in R^{x0.size}, "
                f"gradient in R^{g.size}"
            )
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "gradient", g)


@dataclass(frozen=True)
class Candidate:
    index: int
    point: Tuple[float, ...]
    residual: float
    value: float


def criticality_residual(spec: ConstraintSpec) -> float:
    """
    max |f'(x0) e| / (1 + ||f'(x0)||) over unit tangent vectors e.

    The stored tangent basis is orthonormal, so this is ||Q^T g|| / (1 + ||g||)
    and does not depend on the basis chosen for the tangent space. An empty
    tangent space gives 0 with a DegenerateConstraintWarning.
    """
    if spec.tangent_basis.dim == 0:
        warnings.warn("empty tangent basis; criticality residual is 0 by convention",
                      DegenerateConstraintWarning, stacklevel=2)
        return 0.0
    g = spec.gradient
    return float(np.linalg.norm(spec.tangent_basis.basis.T @ g) / (1.0 + np.linalg.norm(g)))


def sweep_candidates(f: Callable[[np.ndarray], float],
                     gradient: Callable[[np.ndarray], np.ndarray],
                     leaf: LeafSample,
                     tol: float = DEFAULT_TOL) -> List[Candidate]:
    """
    Criticality residual at the interior nodes of a computed leaf, sorted ascending.

    Tangent frames come from np.gradient of z -> z + psi(z) along each grid
    axis. Axes with fewer than three nodes contribute no interior restriction.
    """
    counts = [len(a) for a in leaf.axes]
    if any(c < 2 for c in counts):
        raise InvalidInputError("leaf needs at least two nodes per axis")
    n = leaf.points.shape[1]
    pts = leaf.points.reshape(tuple(counts) + (n,))
    frames = [np.gradient(pts, leaf.axes[j], axis=j) for j in range(len(counts))]

    out = []
    for flat, idx in enumerate(np.ndindex(*counts)):
        if any(c >= 3 and not 0 < i < c - 1 for i, c in zip(idx, counts)):
            continue
        x = pts[idx]
        frame = np.column_stack([fr[idx] for fr in frames])
        spec = ConstraintSpec(SubspaceBasis.span(frame, tol), x, np.asarray(gradient(x), dtype=float))
        out.append(Candidate(flat, tuple(float(v) for v in x), criticality_residual(spec), float(f(x))))
    out.sort(key=lambda c: (c.residual, c.index))
    if out:
        logger.info(f"swept {len(out)} leaf nodes; best residual {out[0].residual:.3e} at {out[0].point}")
    return out


def best_rank_approximation(b, k: int) -> np.ndarray:
    """Truncated SVD of B to rank k."""
    b = as_operator(b, "B")
    if not 0 <= k <= min(b.shape):
        raise InvalidInputError(f"rank {k} out of range for shape {b.shape}")
    u, s, vt = sla.svd(b, full_matrices=False)
    return (u[:, :k] * s[:k]) @ vt[:k]


def frobenius_distance_gradient(x, b) -> np.ndarray:
    """Gradient 2 (X - B) of ||X - B||_F^2."""
    return 2.0 * (as_operator(x, "X") - as_operator(b, "B"))


def matrix_constraint(x, b, tol: float = DEFAULT_TOL) -> ConstraintSpec:
    """ConstraintSpec for ||X - B||_F^2 on the rank stratum through X (flattened)."""
    x = as_operator(x, "X")
    return ConstraintSpec(
        tangent_space(operator_point(x, tol=tol), tol),
        flatten(x),
        flatten(frobenius_distance_gradient(x, b)),
    )


def rank_preserving_neighbor(x, k: int, distance: float, seed: int = 0) -> np.ndarray:
    """
    A rank-k matrix at Frobenius distance about `distance` from the rank-k X.

    X = L R^T is moved along the factor curve (L + s G) (R + s H)^T with
    Gaussian G, H drawn from `seed`; s is chosen from the first-order length
    of the curve, so the realised distance matches to O(distance^2).
    """
    x = as_operator(x, "X")
    if not 1 <= k <= min(x.shape):
        raise InvalidInputError(f"rank {k} out of range for shape {x.shape}")
    u, s, vt = sla.svd(x, full_matrices=False)
    left, right = u[:, :k] * s[:k], vt[:k].T
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(left.shape)
    h = rng.standard_normal(right.shape)
    speed = np.linalg.norm(g @ right.T + left @ h.T)
    if speed == 0.0:
        raise InvalidInputError("degenerate factor direction")
    step = distance / speed
    return (left + step * g) @ (right + step * h).T

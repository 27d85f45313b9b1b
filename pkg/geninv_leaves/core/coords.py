"""
Coordinate operators between subspaces that share a complement.

If E0 and E1 are both complements of E*, then E1 is the graph
{e + alpha e : e in E0} of a unique alpha: E0 -> E*. alpha is stored as a
dim E* x dim E0 matrix in the orthonormal bases held by the SubspaceBasis
objects, so equality checks on alpha are basis-dependent.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotComplementaryError
from .linalg import DEFAULT_TOL, SubspaceBasis, is_complement, oblique_projection

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CoordinateOperator:
    e0: SubspaceBasis
    e_star: SubspaceBasis
    alpha: np.ndarray

    def __post_init__(self):
        expected = (self.e_star.dim, self.e0.dim)
        if self.e0.ambient_dim != self.e_star.ambient_dim:
            raise InvalidInputError("E0 and E* live in different ambient spaces")
        if np.shape(self.alpha) != expected:
            raise InvalidInputError(f"alpha has shape {np.shape(self.alpha)}, expected {expected}")


def coordinate_operator(e0: SubspaceBasis, e1: SubspaceBasis, e_star: SubspaceBasis,
                        tol: float = DEFAULT_TOL) -> CoordinateOperator:
    """
    The alpha with E1 = {e + alpha e : e in E0}.

    Computed as the projection onto E* along E0 composed with the projection
    onto E1 along E*, restricted to E0.

    Raises:
        NotComplementaryError: E0 or E1 is not a complement of E*
    """
    if not is_complement(e0, e_star, tol):
        raise NotComplementaryError("E0 is not a complement of E*")
    if not is_complement(e1, e_star, tol):
        raise NotComplementaryError("E1 is not a complement of E*")
    if e0.dim == 0:
        return CoordinateOperator(e0, e_star, np.zeros((e_star.dim, 0)))
    onto_e1 = oblique_projection(e1, e_star, tol).projection_onto_first
    onto_star = oblique_projection(e_star, e0, tol).projection_onto_first
    alpha = e_star.basis.T @ onto_star @ onto_e1 @ e0.basis
    return CoordinateOperator(e0, e_star, alpha)


def graph_subspace(co: CoordinateOperator, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Basis of {e + alpha e : e in E0}; always a complement of E*."""
    n = co.e0.ambient_dim
    if co.e0.dim == 0:
        return SubspaceBasis.zero(n)
    graph = SubspaceBasis(n, co.e0.basis + co.e_star.basis @ co.alpha)
    if not is_complement(graph, co.e_star, tol):
        raise NotComplementaryError("graph of alpha is not a complement of E*")
    return graph


def cofinal_member(m_x: SubspaceBasis, e_star: SubspaceBasis, tol: float = DEFAULT_TOL) -> bool:
    """True iff M(x) + E* is a direct sum equal to the ambient space."""
    return is_complement(m_x, e_star, tol)

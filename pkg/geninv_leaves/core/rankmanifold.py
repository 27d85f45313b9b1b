"""
Charts for the fixed-rank stratum of m x n matrices.

Operators are flattened column-major (see linalg.flatten) whenever they are
treated as vectors. For X with a generalized inverse X+:

    M(X) = {T : T N(X) in R(X)}                         tangent space
    E_X  = {T : R(T) in N(X+), N(T) contains R(X+)}     its complement

An anchor A with A+ fixes M0 = M(A), E* = E_A, the ball W (||X - A|| < 1/||A+||)
and the larger region V1 (||(X - A) A+|| < 1). On V1 the map

    D(X)  = (X - A) A+ A + C(X)^-1 X,      C(X) = I + (X - A) A+
    D*(T) = T A+ A + C(T) T (I - A+ A)

is a diffeomorphism with inverse D*, and D flattens the rank-k stratum near
A into M0.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .coords import coordinate_operator
from .errors import (
    InvalidDirectionError,
    InvalidInputError,
    InverseFailureError,
    NeedsSplittingError,
    NotCofinalError,
    NotComplementaryError,
    NotInSError,
    OutOfBallError,
)
from .geninv import (
    BALL_MARGIN,
    GenInverse,
    condition_report,
    moore_penrose_geninv,
    perturbation_context,
    perturbed_inverse,
)
from .linalg import (
    DEFAULT_TOL,
    SubspaceBasis,
    as_operator,
    flatten,
    is_complement,
    null_space,
    numerical_rank,
    oblique_projection,
    range_space,
    spectral_norm,
    unflatten,
)
from .newton import newton_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OperatorPoint:
    """A matrix X, optionally with a generalized inverse attached."""
    x: np.ndarray
    geninv: Optional[GenInverse] = None

    def require_geninv(self) -> GenInverse:
        if self.geninv is None:
            raise NeedsSplittingError("operator point has no generalized inverse attached")
        return self.geninv


def operator_point(x, geninv: Optional[GenInverse] = None, tol: float = DEFAULT_TOL) -> OperatorPoint:
    """Wrap X; with geninv=None the Moore-Penrose inverse is attached."""
    x = as_operator(x, "X")
    if geninv is None:
        geninv = moore_penrose_geninv(x, tol)
    elif geninv.a.shape != x.shape or spectral_norm(geninv.a - x) > tol * (1.0 + spectral_norm(x)):
        raise InvalidInputError("generalized inverse does not belong to X")
    return OperatorPoint(x, geninv)


def tangent_space(point: OperatorPoint, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """
    M(X) flattened. Column j of the projector matrix is P(E_j) for the j-th
    elementary matrix, P(T) = X X+ T + (I - X X+) T X+ X.

    Raises:
        NeedsSplittingError: no generalized inverse attached
    """
    gi = point.require_geninv()
    x, xp = point.x, gi.a_plus
    m, n = x.shape
    onto_range = x @ xp
    onto_range_plus = xp @ x
    proj = np.kron(np.eye(n), onto_range) + np.kron(onto_range_plus.T, np.eye(m) - onto_range)
    return SubspaceBasis.span(proj, tol)


def complement_space(point: OperatorPoint, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """
    E_X flattened: the range of T -> (I - X X+) T (I - X+ X).

    Raises:
        NeedsSplittingError: no generalized inverse attached
        NotComplementaryError: E_X fails to complement M(X) numerically
    """
    gi = point.require_geninv()
    x, xp = point.x, gi.a_plus
    m, n = x.shape
    proj = np.kron((np.eye(n) - xp @ x).T, np.eye(m) - x @ xp)
    e_x = SubspaceBasis.span(proj, tol)
    if not is_complement(tangent_space(point, tol), e_x, tol):
        raise NotComplementaryError("E_X is not a complement of M(X)")
    return e_x


def normal_component(point: OperatorPoint, t) -> np.ndarray:
    """The E_X-component (I - X X+) T (I - X+ X) of T."""
    gi = point.require_geninv()
    x, xp = point.x, gi.a_plus
    t = as_operator(t, "T")
    return (np.eye(x.shape[0]) - x @ xp) @ t @ (np.eye(x.shape[1]) - xp @ x)


@dataclass(frozen=True, eq=False)
class ChartData:
    anchor: OperatorPoint
    m0: SubspaceBasis
    e_star: SubspaceBasis
    w_radius: float
    onto_range: np.ndarray        # A A+
    onto_null_plus: np.ndarray    # I - A A+
    onto_range_plus: np.ndarray   # A+ A
    onto_n0: np.ndarray           # I - A+ A
    rank: int
    tol: float = DEFAULT_TOL

    @property
    def a(self) -> np.ndarray:
        return self.anchor.x

    @property
    def a_plus(self) -> np.ndarray:
        return self.anchor.geninv.a_plus

    @property
    def shape(self):
        return self.a.shape

    def c_map(self, x: np.ndarray) -> np.ndarray:
        return np.eye(self.shape[0]) + (x - self.a) @ self.a_plus

    def v1_norm(self, x: np.ndarray) -> float:
        return spectral_norm((x - self.a) @ self.a_plus)

    def in_w(self, x: np.ndarray) -> bool:
        return spectral_norm(x - self.a) < self.w_radius - BALL_MARGIN

    def in_v1(self, x: np.ndarray) -> bool:
        return self.v1_norm(x) < 1.0 - BALL_MARGIN

    def e_star_component(self, t: np.ndarray) -> np.ndarray:
        """Projection onto E* along M0: (I - A A+) T (I - A+ A)."""
        return self.onto_null_plus @ t @ self.onto_n0

    def require_w(self, x: np.ndarray) -> None:
        if not self.in_w(x):
            d = spectral_norm(x - self.a)
            raise OutOfBallError(f"||X - A|| = {d:.6g} is not below {self.w_radius:.6g}",
                                 distance=d, radius=self.w_radius)

    def require_v1(self, x: np.ndarray) -> None:
        if not self.in_v1(x):
            d = self.v1_norm(x)
            raise OutOfBallError(f"||(X - A) A+|| = {d:.6g} is not below 1", distance=d, radius=1.0)

    def _operand(self, x, name: str) -> np.ndarray:
        x = as_operator(x, name)
        if x.shape != self.shape:
            raise InvalidInputError(f"{name} has shape {x.shape}, anchor has shape {self.shape}")
        return x


def anchor_chart(a, geninv: Optional[GenInverse] = None, tol: float = DEFAULT_TOL) -> ChartData:
    """
    Chart data at the anchor A (Moore-Penrose inverse unless geninv is given).
    """
    point = operator_point(a, geninv, tol)
    a, a_plus = point.x, point.geninv.a_plus
    m, n = a.shape
    r = numerical_rank(a, tol)
    m0 = tangent_space(point, tol)
    e_star = complement_space(point, tol)
    if m0.dim != m * n - (n - r) * (m - r) or e_star.dim != (n - r) * (m - r):
        logger.warning(f"chart dimensions {m0.dim} + {e_star.dim} disagree with rank {r}")
    norm = spectral_norm(a_plus)
    ctx = ChartData(
        anchor=point,
        m0=m0,
        e_star=e_star,
        w_radius=float("inf") if norm == 0.0 else 1.0 / norm,
        onto_range=a @ a_plus,
        onto_null_plus=np.eye(m) - a @ a_plus,
        onto_range_plus=a_plus @ a,
        onto_n0=np.eye(n) - a_plus @ a,
        rank=r,
        tol=tol,
    )
    logger.info(f"anchor chart: {m}x{n} rank {r}, dim M0 = {m0.dim}, dim E* = {e_star.dim}, "
                f"W radius {ctx.w_radius:.4g}")
    return ctx


def tangent_projection(ctx: ChartData, x, t) -> np.ndarray:
    """
    Projection of T onto M(X) along E*:
    P1 T + (I - P1) T P2 with P1 onto R(X) along N(A+) and P2 onto R(A+) along N(X).

    Raises:
        NotCofinalError: M(X) does not complement E*
    """
    x = ctx._operand(x, "X")
    t = ctx._operand(t, "T")
    gi = ctx.anchor.geninv
    try:
        p1 = oblique_projection(range_space(x, ctx.tol), gi.null_plus, ctx.tol).projection_onto_first
        p2 = oblique_projection(gi.range_plus, null_space(x, ctx.tol), ctx.tol).projection_onto_first
    except NotComplementaryError as e:
        raise NotCofinalError(f"M(X) is not a complement of E*: {e}", point=x) from e

    def apply(s: np.ndarray) -> np.ndarray:
        return p1 @ s + (np.eye(x.shape[0]) - p1) @ s @ p2

    projected = apply(t)
    drift = spectral_norm(apply(projected) - projected)
    if drift > 1e-8 * (1.0 + spectral_norm(t)):
        logger.warning(f"tangent projection not idempotent: residual {drift:.3e}")
    return projected


def chart_forward(ctx: ChartData, x) -> np.ndarray:
    """
    D(X) = (X - A) A+ A + C(X)^-1 X on V1.

    Raises:
        OutOfBallError: X outside V1
    """
    x = ctx._operand(x, "X")
    ctx.require_v1(x)
    return (x - ctx.a) @ ctx.onto_range_plus + sla.solve(ctx.c_map(x), x)


def chart_inverse(ctx: ChartData, t) -> np.ndarray:
    """
    D*(T) = T A+ A + C(T) T (I - A+ A), the inverse of D on V1.

    Raises:
        OutOfBallError: T outside V1
    """
    t = ctx._operand(t, "T")
    ctx.require_v1(t)
    return t @ ctx.onto_range_plus + ctx.c_map(t) @ t @ ctx.onto_n0


def rectification_residual(ctx: ChartData, x) -> float:
    """||E*-component of D(X)||; zero exactly on the rank stratum of A."""
    return spectral_norm(ctx.e_star_component(chart_forward(ctx, x)))


def _small(residual: float, scale: float, ctx: ChartData) -> bool:
    return residual <= 100.0 * ctx.tol * max(ctx.shape) * (1.0 + scale)


def _require_tangent_direction(ctx: ChartData, dx: np.ndarray) -> None:
    off = spectral_norm(ctx.e_star_component(dx))
    if off > 100.0 * ctx.tol * max(ctx.shape) * spectral_norm(dx):
        raise InvalidDirectionError(f"direction has E*-component of norm {off:.3e}; not in M0")


def in_s(ctx: ChartData, x) -> bool:
    """X in W with R(X) missing N(A+), so that A+ C(X)^-1 is a generalized inverse of X."""
    x = ctx._operand(x, "X")
    if not ctx.in_w(x):
        return False
    pctx = perturbation_context(ctx.anchor.geninv, x, ctx.tol)
    return condition_report(pctx, ctx.tol).range_misses_null_plus


def alpha_tangent(ctx: ChartData, x, dx) -> np.ndarray:
    """
    alpha(X) dX = (I - A A+)(C^-1 dX A+ C^-1 X - C^-1 dX)(I - A+ A), C = C(X).

    The E*-part of the tangent of M(X) over the direction dX in M0.

    Raises:
        OutOfBallError: X outside W
        NotInSError: R(X) meets N(A+)
        InvalidDirectionError: dX not in M0
    """
    x = ctx._operand(x, "X")
    dx = ctx._operand(dx, "dX")
    ctx.require_w(x)
    if not in_s(ctx, x):
        raise NotInSError("R(X) meets N(A+); X has no generalized inverse A+ C^-1")
    _require_tangent_direction(ctx, dx)
    c = ctx.c_map(x)
    c_inv_dx = sla.solve(c, dx)
    c_inv_x = sla.solve(c, x)
    return ctx.onto_null_plus @ (c_inv_dx @ ctx.a_plus @ c_inv_x - c_inv_dx) @ ctx.onto_n0


def alpha_tangent_oracle(ctx: ChartData, x, dx) -> np.ndarray:
    """
    alpha(X) dX through the coordinate operator from M0 to M(X) along E*,
    with M(X) built from the generalized inverse A+ C(X)^-1 of X.
    """
    x = ctx._operand(x, "X")
    dx = ctx._operand(dx, "dX")
    pctx = perturbation_context(ctx.anchor.geninv, x, ctx.tol)
    point = OperatorPoint(x, perturbed_inverse(pctx, ctx.tol))
    co = coordinate_operator(ctx.m0, tangent_space(point, ctx.tol), ctx.e_star, ctx.tol)
    coords = co.alpha @ (ctx.m0.basis.T @ flatten(dx))
    return unflatten(ctx.e_star.basis @ coords, *ctx.shape)


def phi0(ctx: ChartData, t: np.ndarray) -> np.ndarray:
    """T A+ A + A A+ C(T) T (I - A+ A)."""
    return t @ ctx.onto_range_plus + ctx.onto_range @ ctx.c_map(t) @ t @ ctx.onto_n0


def phi0_derivative(ctx: ChartData, t: np.ndarray, dt: np.ndarray) -> np.ndarray:
    """dT A+ A + A A+ (dT A+ T + T A+ dT)(I - A+ A)."""
    a_plus = ctx.a_plus
    return dt @ ctx.onto_range_plus + ctx.onto_range @ (dt @ a_plus @ t + t @ a_plus @ dt) @ ctx.onto_n0


def phi1(ctx: ChartData, t: np.ndarray) -> np.ndarray:
    """(I - A A+) C(T) T (I - A+ A)."""
    return ctx.onto_null_plus @ ctx.c_map(t) @ t @ ctx.onto_n0


def leaf_psi_rank(ctx: ChartData, z) -> np.ndarray:
    """
    Psi(Z) = phi1(phi0^-1(Z)) for Z in M0 near A.

    phi0 is inverted by damped Newton over M0 coordinates with its analytic
    derivative. Z + Psi(Z) = D*(phi0^-1(Z)) has the rank of A.

    Raises:
        OutOfBallError: Z outside W
        InvalidDirectionError: Z not in M0
        InverseFailureError: Newton did not converge
    """
    z = ctx._operand(z, "Z")
    ctx.require_w(z)
    if not _small(spectral_norm(ctx.e_star_component(z)), spectral_norm(z), ctx):
        raise InvalidDirectionError("Z is not in M0")
    q = ctx.m0.basis
    m, n = ctx.shape
    target = q.T @ flatten(z)

    def as_matrix(c: np.ndarray) -> np.ndarray:
        return unflatten(q @ c, m, n)

    def residual(c: np.ndarray) -> np.ndarray:
        return q.T @ flatten(phi0(ctx, as_matrix(c))) - target

    def jacobian(c: np.ndarray) -> np.ndarray:
        t = as_matrix(c)
        cols = [q.T @ flatten(phi0_derivative(ctx, t, as_matrix(e))) for e in np.eye(q.shape[1])]
        return np.column_stack(cols) if cols else np.zeros((0, 0))

    result = newton_solve(residual, jacobian, target.copy(),
                          tol=1e-12 * (1.0 + np.linalg.norm(target)))
    if not result.success:
        raise InverseFailureError(f"phi0 inversion failed: {result.message} "
                                  f"(residual {result.residual:.3e})", residual=result.residual)
    logger.debug(f"phi0 inverted in {result.nit} Newton steps")
    return phi1(ctx, as_matrix(result.x))


def leaf_point(ctx: ChartData, z) -> np.ndarray:
    """Z + Psi(Z), a point of the rank stratum through A."""
    z = ctx._operand(z, "Z")
    return z + leaf_psi_rank(ctx, z)


def stratum_membership(ctx: ChartData, x) -> bool:
    """
    rank X == rank A for X in W; cross-checked against the rectification residual.

    Raises:
        OutOfBallError: X outside W
    """
    x = ctx._operand(x, "X")
    ctx.require_w(x)
    member = numerical_rank(x, ctx.tol) == ctx.rank
    residual = rectification_residual(ctx, x)
    rectified = _small(residual, spectral_norm(x), ctx)
    if member != rectified:
        logger.warning(f"rank membership ({member}) disagrees with rectification residual {residual:.3e}")
    return member


@dataclass
class TransitionReport:
    """Chart transition D_a o D_b^-1 evaluated at caller-supplied samples."""
    samples: int
    max_source_residual: float
    max_target_residual: float
    max_identity_deviation: float
    max_jacobian_variation_ratio: float
    jacobians: List[np.ndarray] = field(default_factory=list, repr=False)

    def within(self, tol: float) -> bool:
        return self.max_source_residual <= tol and self.max_target_residual <= tol


def _transition_jacobian(ctx_a: ChartData, ctx_b: ChartData, t: np.ndarray, h: float) -> np.ndarray:
    m, n = ctx_a.shape
    qa, qb = ctx_a.m0.basis, ctx_b.m0.basis
    cols = []
    for e in np.eye(qb.shape[1]):
        d = unflatten(qb @ e, m, n)
        plus = chart_forward(ctx_a, chart_inverse(ctx_b, t + h * d))
        minus = chart_forward(ctx_a, chart_inverse(ctx_b, t - h * d))
        cols.append(qa.T @ flatten(plus - minus) / (2.0 * h))
    return np.column_stack(cols)


def atlas_transition_check(ctx_a: ChartData, ctx_b: ChartData, samples: Sequence[np.ndarray],
                           h: float = 1e-6) -> TransitionReport:
    """
    Evaluate the transition D_a o D_b^-1 on points X of the stratum lying in both W balls.

    For each sample: the E*_b-residual of D_b(X), the E*_a-residual of
    D_a(D_b^-1(D_b X)) and the deviation from the identity. Central-difference
    Jacobians (M_b to M_a coordinates) are compared between consecutive
    samples; the report holds the largest change per unit sample spacing.

    Raises:
        InvalidInputError: no samples
        OutOfBallError: a sample lies outside one of the W balls
    """
    if len(samples) == 0:
        raise InvalidInputError("atlas transition check needs at least one sample")
    source, target, identity = [], [], []
    jacobians, previous = [], []
    for x in samples:
        x = ctx_a._operand(x, "sample")
        ctx_a.require_w(x)
        ctx_b.require_w(x)
        t_b = chart_forward(ctx_b, x)
        t_a = chart_forward(ctx_a, chart_inverse(ctx_b, t_b))
        source.append(spectral_norm(ctx_b.e_star_component(t_b)))
        target.append(spectral_norm(ctx_a.e_star_component(t_a)))
        identity.append(spectral_norm(t_a - t_b))
        jacobians.append(_transition_jacobian(ctx_a, ctx_b, t_b, h))
        previous.append(t_b)

    ratio = 0.0
    for i in range(1, len(jacobians)):
        spacing = spectral_norm(previous[i] - previous[i - 1])
        if spacing > 0:
            ratio = max(ratio, spectral_norm(jacobians[i] - jacobians[i - 1]) / spacing)

    report = TransitionReport(
        samples=len(samples),
        max_source_residual=max(source),
        max_target_residual=max(target),
        max_identity_deviation=max(identity),
        max_jacobian_variation_ratio=ratio,
        jacobians=jacobians,
    )
    logger.info(f"atlas transition over {report.samples} samples: residuals "
                f"{report.max_source_residual:.2e} / {report.max_target_residual:.2e}")
    return report

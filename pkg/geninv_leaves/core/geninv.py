"""
Generalized inverses with prescribed complements and their perturbation calculus.

A generalized inverse here is a (1,2)-inverse: A+ A A+ = A+ and A A+ A = A.
It is fixed by choosing R(A+) complementary to N(A) and N(A+) complementary
to R(A). Perturbations T of A inside the ball ||T - A|| < 1/||A+|| keep a
generalized inverse of the form B = A+ C^-1 exactly when R(T) misses N(A+).
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.stats import qmc

from .errors import (
    DegenerateSplitError,
    FamilyEvaluationError,
    InvalidInputError,
    InverseFailureError,
    NoInverseInBallError,
    NotComplementaryError,
    OutOfBallError,
)
from .linalg import (
    DEFAULT_TOL,
    SubspaceBasis,
    as_operator,
    as_vector,
    contains,
    image_space,
    intersection_dim,
    is_complement,
    null_space,
    numerical_rank,
    oblique_projection,
    range_space,
    same_subspace,
    spectral_norm,
)

logger = logging.getLogger(__name__)

# strict-inequality margin for ball membership
BALL_MARGIN = 1e-12

OperatorFamily = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class GenInverse:
    """A with a generalized inverse A+ and the complements that fix it."""
    a: np.ndarray
    a_plus: np.ndarray
    range_plus: SubspaceBasis
    null_plus: SubspaceBasis

    @property
    def shape(self) -> Tuple[int, int]:
        return self.a.shape

    def ball_radius(self) -> float:
        """1/||A+||, infinite when A+ = 0."""
        norm = spectral_norm(self.a_plus)
        return float("inf") if norm == 0.0 else 1.0 / norm


@dataclass(frozen=True, eq=False)
class PerturbationContext:
    """A base generalized inverse, a perturbation T, and C_A(A+,T), D_A(A+,T)."""
    base: GenInverse
    t: np.ndarray
    c_map: np.ndarray
    d_map: np.ndarray
    distance: float
    radius: float

    @property
    def in_ball(self) -> bool:
        return self.distance < self.radius - BALL_MARGIN

    def require_ball(self) -> None:
        if not self.in_ball:
            raise OutOfBallError(
                f"||T - A|| = {self.distance:.6g} is not below 1/||A+|| = {self.radius:.6g}",
                distance=self.distance,
                radius=self.radius,
            )


@dataclass(frozen=True)
class ConditionReport:
    """The seven equivalent conditions evaluated numerically, in order (i)..(vii)."""
    range_misses_null_plus: bool
    inverse_axioms_hold: bool
    range_complements_null_plus: bool
    kernel_complements_range_plus: bool
    kernel_projects_onto_null: bool
    kernel_image_in_range: bool
    image_in_range: bool

    def values(self) -> Tuple[bool, ...]:
        return (
            self.range_misses_null_plus,
            self.inverse_axioms_hold,
            self.range_complements_null_plus,
            self.kernel_complements_range_plus,
            self.kernel_projects_onto_null,
            self.kernel_image_in_range,
            self.image_in_range,
        )

    @property
    def consistent(self) -> bool:
        return len(set(self.values())) == 1


@dataclass(frozen=True, eq=False)
class PerturbationProjections:
    """P1 = B T and P2 = T B with the decompositions they induce."""
    p1: np.ndarray
    p2: np.ndarray
    extra_kernel: SubspaceBasis
    p1_idempotency: float
    p2_idempotency: float
    p1_range_is_range_plus: bool
    p2_kernel_is_null_plus: bool
    codomain_split: bool
    domain_split: bool


@dataclass
class LocallyFineResult:
    """Outcome of sampling a family around x0."""
    fine: bool
    samples: np.ndarray
    distances: List[float] = field(default_factory=list)
    witness: Optional[np.ndarray] = None
    reason: str = ""


def _residual_small(residual: float, scale: float, tol: float, dims: Tuple[int, ...]) -> bool:
    return residual <= 100.0 * tol * max(dims) * max(scale, 1.0)


def axiom_residuals(gi: GenInverse) -> Tuple[float, float]:
    """
    Residuals of the two generalized-inverse axioms.

    Returns:
        (||A+ A A+ - A+||, ||A A+ A - A||) in the spectral norm
    """
    a, ap = gi.a, gi.a_plus
    return spectral_norm(ap @ a @ ap - ap), spectral_norm(a @ ap @ a - a)


def construct_geninv(a, range_plus: SubspaceBasis, null_plus: SubspaceBasis,
                     tol: float = DEFAULT_TOL) -> GenInverse:
    """
    Build the unique generalized inverse with R(A+) = range_plus, N(A+) = null_plus.

    A+ = G (H^T A G)^-1 H^T P where G spans range_plus, H is an orthonormal
    basis of R(A) and P projects onto R(A) along null_plus.

    Args:
        a: m x n operator
        range_plus: complement of N(A) in R^n
        null_plus: complement of R(A) in R^m
        tol: relative rank tolerance

    Raises:
        NotComplementaryError: a prescribed subspace is not a complement
        DegenerateSplitError: A restricted to range_plus is numerically singular
    """
    a = as_operator(a, "A")
    m, n = a.shape
    if range_plus.ambient_dim != n or null_plus.ambient_dim != m:
        raise InvalidInputError(
            f"complements live in R^{range_plus.ambient_dim} and R^{null_plus.ambient_dim}, "
            f"expected R^{n} and R^{m}"
        )
    kernel = null_space(a, tol)
    image = range_space(a, tol)
    if not is_complement(range_plus, kernel, tol):
        raise NotComplementaryError(
            f"range_plus (dim {range_plus.dim}) is not a complement of N(A) (dim {kernel.dim})"
        )
    if not is_complement(null_plus, image, tol):
        raise NotComplementaryError(
            f"null_plus (dim {null_plus.dim}) is not a complement of R(A) (dim {image.dim})"
        )

    r = image.dim
    if r == 0:
        a_plus = np.zeros((n, m))
    else:
        p = oblique_projection(image, null_plus, tol).projection_onto_first
        g, h = range_plus.basis, image.basis
        restricted = h.T @ a @ g
        s = sla.svdvals(restricted)
        if s[-1] <= tol * spectral_norm(a) * max(m, n):
            raise DegenerateSplitError(
                f"A restricted to range_plus is singular (sigma_min = {s[-1]:.3e})"
            )
        a_plus = g @ sla.solve(restricted, h.T @ p)

    gi = GenInverse(a, a_plus, range_plus, null_plus)
    first, second = axiom_residuals(gi)
    logger.debug(f"generalized inverse of {m}x{n} rank-{r} operator, "
                 f"axiom residuals {first:.2e} / {second:.2e}")
    return gi


def moore_penrose_geninv(a, tol: float = DEFAULT_TOL) -> GenInverse:
    """The generalized inverse with orthogonal complements (the pseudoinverse)."""
    a = as_operator(a, "A")
    return construct_geninv(a, range_space(a.T, tol), null_space(a.T, tol), tol)


def perturbation_context(base: GenInverse, t, tol: float = DEFAULT_TOL) -> PerturbationContext:
    """Build C_A(A+,T) = I + (T-A)A+ and D_A(A+,T) = I + A+(T-A)."""
    t = as_operator(t, "T")
    if t.shape != base.a.shape:
        raise InvalidInputError(f"T has shape {t.shape}, A has shape {base.a.shape}")
    m, n = t.shape
    diff = t - base.a
    c_map = np.eye(m) + diff @ base.a_plus
    d_map = np.eye(n) + base.a_plus @ diff
    return PerturbationContext(
        base=base,
        t=t,
        c_map=c_map,
        d_map=d_map,
        distance=spectral_norm(diff),
        radius=base.ball_radius(),
    )


def _c_inverse(ctx: PerturbationContext) -> np.ndarray:
    return sla.solve(ctx.c_map, np.eye(ctx.c_map.shape[0]))


def _range_misses_null_plus(ctx: PerturbationContext, tol: float) -> bool:
    return intersection_dim(range_space(ctx.t, tol), ctx.base.null_plus, tol) == 0


def condition_report(ctx: PerturbationContext, tol: float = DEFAULT_TOL) -> ConditionReport:
    """
    Evaluate the seven conditions that are equivalent inside the ball.

    Raises:
        OutOfBallError: ||T - A|| is not strictly below 1/||A+||
    """
    ctx.require_ball()
    base, t = ctx.base, ctx.t
    m, n = t.shape
    c_inv = _c_inverse(ctx)
    b = base.a_plus @ c_inv
    t_range = range_space(t, tol)
    t_kernel = null_space(t, tol)
    a_range = range_space(base.a, tol)
    a_kernel = null_space(base.a, tol)

    bt_scale = spectral_norm(b) * spectral_norm(t)
    axioms = (
        _residual_small(spectral_norm(b @ t @ b - b), spectral_norm(b) * (1.0 + bt_scale), tol, (m, n))
        and _residual_small(spectral_norm(t @ b @ t - t), spectral_norm(t) * (1.0 + bt_scale), tol, (m, n))
        and same_subspace(range_space(b, tol), base.range_plus, tol)
        and same_subspace(null_space(b, tol), base.null_plus, tol)
    )

    kernel_projection = np.eye(n) - base.a_plus @ base.a
    ct = c_inv @ t

    report = ConditionReport(
        range_misses_null_plus=intersection_dim(t_range, base.null_plus, tol) == 0,
        inverse_axioms_hold=bool(axioms),
        range_complements_null_plus=is_complement(t_range, base.null_plus, tol),
        kernel_complements_range_plus=is_complement(t_kernel, base.range_plus, tol),
        kernel_projects_onto_null=same_subspace(image_space(kernel_projection, t_kernel, tol), a_kernel, tol),
        kernel_image_in_range=contains(a_range, image_space(ct, a_kernel, tol), tol),
        image_in_range=contains(a_range, image_space(ct, SubspaceBasis.full(n), tol), tol),
    )
    if not report.consistent:
        logger.warning(f"equivalent conditions disagree numerically: {report.values()}")
    return report


def perturbed_inverse(ctx: PerturbationContext, tol: float = DEFAULT_TOL) -> GenInverse:
    """
    B = A+ C^-1, the generalized inverse of T with R(B) = R(A+) and N(B) = N(A+).

    The alternative form D^-1 A+ is computed alongside and must agree.

    Raises:
        OutOfBallError: T outside the ball
        NoInverseInBallError: R(T) meets N(A+)
        InverseFailureError: the two forms of B disagree beyond roundoff
    """
    ctx.require_ball()
    if not _range_misses_null_plus(ctx, tol):
        raise NoInverseInBallError("R(T) meets N(A+); A+ C^-1 is not a generalized inverse of T")
    a_plus = ctx.base.a_plus
    b = sla.solve(ctx.c_map.T, a_plus.T).T
    b_alt = sla.solve(ctx.d_map, a_plus)
    gap = spectral_norm(b - b_alt)
    bound = 1e-10 * max(spectral_norm(b), 1.0) * np.linalg.cond(ctx.c_map)
    if gap > bound:
        raise InverseFailureError(f"A+ C^-1 and D^-1 A+ differ by {gap:.3e}", residual=gap)
    logger.debug(f"perturbed inverse at distance {ctx.distance:.3e}, form gap {gap:.2e}")
    return GenInverse(ctx.t, b, ctx.base.range_plus, ctx.base.null_plus)


def rank_class_preserved(ctx: PerturbationContext, tol: float = DEFAULT_TOL) -> bool:
    """True iff rank T = rank A, for T inside the ball."""
    ctx.require_ball()
    preserved = numerical_rank(ctx.t, tol) == numerical_rank(ctx.base.a, tol)
    misses = _range_misses_null_plus(ctx, tol)
    if preserved != misses:
        logger.warning(f"rank class ({preserved}) disagrees with R(T) ∩ N(A+) = {{0}} ({misses})")
    return preserved


def perturbation_projections(ctx: PerturbationContext,
                             tol: float = DEFAULT_TOL) -> PerturbationProjections:
    """
    The idempotents P1 = B T and P2 = T B for B = A+ C^-1.

    Also returns E' = {e in R(T^T) : T e in N(A+)}, which is {0} exactly when
    R(T) misses N(A+), and checks F = R(T A+) + N(A+) and
    E = R(A+) + E' + N(T) as direct sums.
    """
    ctx.require_ball()
    base, t = ctx.base, ctx.t
    m, n = t.shape
    b = base.a_plus @ _c_inverse(ctx)
    p1, p2 = b @ t, t @ b

    row_space = range_space(t.T, tol)
    if row_space.dim == 0:
        extra = SubspaceBasis.zero(n)
    else:
        coeffs = null_space(base.a_plus @ t @ row_space.basis, tol)
        extra = SubspaceBasis.span(row_space.basis @ coeffs.basis, tol) if coeffs.dim else SubspaceBasis.zero(n)

    ta_range = image_space(t @ base.a_plus, SubspaceBasis.full(m), tol)
    domain_parts = np.hstack([base.range_plus.basis, extra.basis, null_space(t, tol).basis])
    domain_split = (domain_parts.shape[1] == n and numerical_rank(domain_parts, tol) == n)

    return PerturbationProjections(
        p1=p1,
        p2=p2,
        extra_kernel=extra,
        p1_idempotency=spectral_norm(p1 @ p1 - p1),
        p2_idempotency=spectral_norm(p2 @ p2 - p2),
        p1_range_is_range_plus=same_subspace(image_space(p1, SubspaceBasis.full(n), tol), base.range_plus, tol),
        p2_kernel_is_null_plus=same_subspace(null_space(p2, tol), base.null_plus, tol),
        codomain_split=is_complement(ta_range, base.null_plus, tol),
        domain_split=bool(domain_split),
    )


def _ball_samples(x0: np.ndarray, radius: float, count: int, seed: int) -> np.ndarray:
    d = x0.size
    sampler = qmc.Halton(d=d, scramble=True, seed=seed)
    points: List[np.ndarray] = []
    while len(points) < count:
        cube = 2.0 * sampler.random(max(2 * count, 16)) - 1.0
        inside = cube[np.linalg.norm(cube, axis=1) <= 1.0]
        points.extend(inside)
    return x0 + radius * np.asarray(points[:count])


def locally_fine_detect(family: OperatorFamily, x0, geninv0: GenInverse, radius: float,
                        samples: int, seed: int = 0,
                        tol: float = DEFAULT_TOL) -> LocallyFineResult:
    """
    Sample a family T_x around x0 and test R(T_x) ∩ N(T0+) = {0} at each sample.

    Sampling is seeded quasi-uniform (scrambled Halton, rejected to the ball),
    so a failure is reproducible. A sample whose operator leaves the ball
    ||T_x - T0|| < 1/||T0+|| counts as a failure.

    Args:
        family: maps a parameter vector to an m x n operator
        x0: base parameter, family(x0) must equal geninv0.a
        geninv0: generalized inverse of T0 = family(x0)
        radius: sampling radius in parameter space
        samples: number of samples
        seed: sampler seed

    Returns:
        LocallyFineResult with ||T_x+ - T0+|| per sample when fine, else the
        first failing sample as witness
    """
    x0 = as_vector(x0, "x0")
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    if samples < 1:
        raise InvalidInputError(f"samples must be positive, got {samples}")

    def evaluate(x: np.ndarray) -> np.ndarray:
        try:
            value = family(x)
        except Exception as e:
            raise FamilyEvaluationError(f"family evaluation failed at {x.tolist()}: {e}", point=x) from e
        return as_operator(value, "family value")

    t0 = evaluate(x0)
    if t0.shape != geninv0.a.shape or spectral_norm(t0 - geninv0.a) > 1e-8 * (1.0 + spectral_norm(geninv0.a)):
        raise InvalidInputError("family(x0) does not match the operator of geninv0")

    points = _ball_samples(x0, radius, samples, seed)
    result = LocallyFineResult(fine=True, samples=points)
    for x in points:
        ctx = perturbation_context(geninv0, evaluate(x), tol)
        if not ctx.in_ball:
            result.fine, result.witness = False, x
            result.reason = f"outside ball: distance {ctx.distance:.3e} >= {ctx.radius:.3e}"
            break
        if not _range_misses_null_plus(ctx, tol):
            result.fine, result.witness = False, x
            result.reason = "R(T_x) meets N(T0+)"
            break
        b = perturbed_inverse(ctx, tol)
        result.distances.append(spectral_norm(b.a_plus - geninv0.a_plus))

    if result.fine:
        logger.info(f"locally fine over {samples} samples, max distance "
                    f"{max(result.distances):.3e}")
    else:
        logger.info(f"not locally fine: {result.reason} at {result.witness.tolist()}")
    return result


def combined_inverse(gi_plus: GenInverse, gi_oplus: GenInverse,
                     tol: float = DEFAULT_TOL) -> GenInverse:
    """
    B = T0+ T0 T0(+), a generalized inverse with R(B) = R(T0+) and N(B) = N(T0(+)).
    """
    if gi_plus.a.shape != gi_oplus.a.shape or spectral_norm(gi_plus.a - gi_oplus.a) > tol * (1.0 + spectral_norm(gi_plus.a)):
        raise InvalidInputError("both generalized inverses must belong to the same operator")
    b = gi_plus.a_plus @ gi_plus.a @ gi_oplus.a_plus
    return GenInverse(gi_plus.a, b, gi_plus.range_plus, gi_oplus.null_plus)


def independence_radius(gi1: GenInverse, gi2: GenInverse, tol: float = DEFAULT_TOL) -> float:
    """min(1/||T0+||, 1/||T0+ T0 T0(+)||)."""
    return min(gi1.ball_radius(), combined_inverse(gi1, gi2, tol).ball_radius())


def geninv_independence_check(a, gi1: GenInverse, gi2: GenInverse, t,
                              tol: float = DEFAULT_TOL) -> bool:
    """
    Compare R(T) ∩ N(A+) = {0} for two generalized inverses of A.

    Both predicates always agree for T close enough to A; this returns
    whether they did.

    Raises:
        OutOfBallError: ||T - A|| is not below the independence radius
    """
    a = as_operator(a, "A")
    t = as_operator(t, "T")
    for gi in (gi1, gi2):
        if gi.a.shape != a.shape or spectral_norm(gi.a - a) > tol * (1.0 + spectral_norm(a)):
            raise InvalidInputError("generalized inverse does not belong to A")
    if t.shape != a.shape:
        raise InvalidInputError(f"T has shape {t.shape}, A has shape {a.shape}")
    delta = independence_radius(gi1, gi2, tol)
    distance = spectral_norm(t - a)
    if not distance < delta - BALL_MARGIN:
        raise OutOfBallError(f"||T - A|| = {distance:.6g} is not below {delta:.6g}",
                             distance=distance, radius=delta)
    t_range = range_space(t, tol)
    first = intersection_dim(t_range, gi1.null_plus, tol) == 0
    second = intersection_dim(t_range, gi2.null_plus, tol) == 0
    logger.debug(f"independence check: {first} / {second} at distance {distance:.3e}")
    return first == second

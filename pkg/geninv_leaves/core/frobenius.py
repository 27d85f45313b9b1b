"""
Leaves of subspace distributions x -> M(x).

The leaf through x0 is written as a graph z -> z + psi(z) over M0 = M(x0)
with values in a fixed complement E*. psi solves the total differential
system psi'(z) = alpha(z + psi(z)), psi(z0) = psi0, where alpha(x) is the
coordinate operator taking M0 to M(x) along E*.

Two solvers are provided:

* integrate_leaf: fixed-step RK4 along axis-ordered sweeps of a tensor grid
  in M0; two sweep orders are compared and their disagreement is recorded as
  an integrability residual.
* phi_map / phi_leaf: for kernel distributions M(x) = N(f'(x)), the leaf is
  the level set of f and psi is obtained pointwise by Newton inversion of
  phi(x) = T0+(f(x) - f(x0)) + P x, P the projection onto N0 along E*.

normal_form_u gives the straightening map u and checks its first-order
factorization of f.
"""
import itertools
import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla

from ..utils.parallel import map_lines
from .coords import cofinal_member, coordinate_operator
from .errors import (
    AbortedLeafError,
    DivergenceError,
    InvalidInputError,
    InverseFailureError,
    NotCofinalError,
    NotComplementaryError,
    NotGeneralizedRegularError,
    OutOfNeighborhoodError,
)
from .geninv import GenInverse, locally_fine_detect
from .linalg import (
    DEFAULT_TOL,
    SplitPair,
    SubspaceBasis,
    as_operator,
    as_vector,
    null_space,
    oblique_projection,
    same_subspace,
    spectral_norm,
)
from .newton import newton_solve

logger = logging.getLogger(__name__)

VectorMap = Callable[[np.ndarray], np.ndarray]

DEFAULT_STEP = 1e-3
DEFAULT_NODES = 21
FINE_RADIUS = 1e-2
FINE_SAMPLES = 64


@dataclass(frozen=True, eq=False)
class DistributionFamily:
    """
    x -> M(x), given either directly (evaluator returns a SubspaceBasis) or as
    the kernel family N(f'(x)) of a Jacobian evaluator.
    """
    ambient_dim: int
    evaluator: Optional[Callable[[np.ndarray], SubspaceBasis]] = None
    jacobian: Optional[VectorMap] = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if (self.evaluator is None) == (self.jacobian is None):
            raise InvalidInputError("give exactly one of evaluator or jacobian")

    @property
    def is_kernel(self) -> bool:
        return self.jacobian is not None

    def subspace(self, x) -> SubspaceBasis:
        x = as_vector(x, "x")
        if x.size != self.ambient_dim:
            raise InvalidInputError(f"point has dimension {x.size}, expected {self.ambient_dim}")
        if self.jacobian is not None:
            jac = as_operator(self.jacobian(x), "jacobian")
            if jac.shape[1] != self.ambient_dim:
                raise InvalidInputError(f"jacobian has {jac.shape[1]} columns, expected {self.ambient_dim}")
            return null_space(jac, self.tol)
        m = self.evaluator(x)
        if m.ambient_dim != self.ambient_dim:
            raise InvalidInputError(f"family returned a subspace of R^{m.ambient_dim}, expected R^{self.ambient_dim}")
        return m


def kernel_family(jacobian: VectorMap, ambient_dim: int, tol: float = DEFAULT_TOL) -> DistributionFamily:
    return DistributionFamily(ambient_dim, jacobian=jacobian, tol=tol)


def subspace_family(evaluator: Callable[[np.ndarray], SubspaceBasis], ambient_dim: int,
                    tol: float = DEFAULT_TOL) -> DistributionFamily:
    return DistributionFamily(ambient_dim, evaluator=evaluator, tol=tol)


@dataclass(frozen=True, eq=False)
class LeafProblem:
    base_point: np.ndarray
    m0: SubspaceBasis
    e_star: SubspaceBasis
    family: DistributionFamily
    split: SplitPair

    def coordinates(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """(z, w) with x = Q0 z + S w for the stored bases Q0 of M0 and S of E*."""
        return self.split.coordinates(x)

    def point(self, z, w) -> np.ndarray:
        return self.m0.basis @ np.asarray(z, dtype=float) + self.e_star.basis @ np.asarray(w, dtype=float)


def leaf_problem(base_point, family: DistributionFamily, e_star: SubspaceBasis,
                 m0: Optional[SubspaceBasis] = None, tol: float = DEFAULT_TOL) -> LeafProblem:
    """
    Validate the data of a leaf problem.

    Raises:
        NotComplementaryError: M0 and E* do not split the ambient space
        InvalidInputError: a supplied M0 differs from family(x0)
    """
    x0 = as_vector(base_point, "base_point")
    at_base = family.subspace(x0)
    if m0 is None:
        m0 = at_base
    elif not same_subspace(m0, at_base, tol):
        raise InvalidInputError("supplied M0 differs from the family at the base point")
    if e_star.ambient_dim != family.ambient_dim:
        raise InvalidInputError("E* lives in a different ambient space")
    if not cofinal_member(m0, e_star, tol):
        raise NotComplementaryError(f"M0 (dim {m0.dim}) and E* (dim {e_star.dim}) are not complementary")
    return LeafProblem(x0, m0, e_star, family, oblique_projection(m0, e_star, tol))


@dataclass(frozen=True, eq=False)
class AlphaField:
    """x -> alpha(x) as a dim E* x dim M0 matrix in the bases of m0 and e_star."""
    m0: SubspaceBasis
    e_star: SubspaceBasis
    evaluate: VectorMap
    jacobian_mode: str = "analytic"

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))


@dataclass
class LeafSample:
    """
    A gridded leaf. Rows of grid, psi_values and points correspond; grid is
    the tensor product of axes in C order (last axis fastest).
    """
    axes: List[np.ndarray]
    grid: np.ndarray
    psi_values: np.ndarray
    points: np.ndarray
    integrability_residual: np.ndarray
    base_point: np.ndarray
    z0: np.ndarray
    psi0: np.ndarray
    m0: SubspaceBasis
    e_star: SubspaceBasis
    method: str
    step: float
    jacobian_mode: str = "analytic"
    complete: bool = True
    integrable: bool = True
    level_residual: Optional[np.ndarray] = None

    @property
    def max_integrability_residual(self) -> float:
        if self.integrability_residual.size == 0:
            return 0.0
        return float(np.nanmax(self.integrability_residual))

    def base_index(self) -> int:
        """Row of the base coordinate z0."""
        hits = np.flatnonzero(np.all(self.grid == self.z0, axis=1))
        if hits.size == 0:
            raise InvalidInputError("base coordinate is not a grid node")
        return int(hits[0])


def central_difference_jacobian(fun: VectorMap, x, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian with h = 1e-6 (1 + ||x||) by default."""
    x = as_vector(x, "x")
    if h is None:
        h = 1e-6 * (1.0 + np.linalg.norm(x))
    columns = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        plus = np.atleast_1d(np.asarray(fun(x + e), dtype=float))
        minus = np.atleast_1d(np.asarray(fun(x - e), dtype=float))
        columns.append((plus - minus) / (2.0 * h))
    return np.column_stack(columns)


def tensor_grid(center, extent, nodes: int) -> List[np.ndarray]:
    """
    Per-axis node arrays center_j + extent_j * linspace(-1, 1, nodes).

    nodes must be odd so that the center is a node; the middle node is set to
    center_j exactly.
    """
    center = as_vector(center, "center")
    if nodes < 1 or nodes % 2 == 0:
        raise InvalidInputError(f"nodes must be a positive odd integer, got {nodes}")
    ext = np.broadcast_to(np.asarray(extent, dtype=float), center.shape)
    if np.any(ext < 0) or not np.all(np.isfinite(ext)):
        raise InvalidInputError("extent must be finite and nonnegative")
    unit = np.linspace(-1.0, 1.0, nodes)
    axes = []
    for c, e in zip(center, ext):
        axis = c + e * unit
        axis[nodes // 2] = c
        axes.append(axis)
    return axes


def _mesh(axes: Sequence[np.ndarray]) -> np.ndarray:
    if not axes:
        return np.zeros((1, 0))
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _require_generalized_regular(jacobian: VectorMap, x0: np.ndarray, geninv0: GenInverse,
                                 radius: float, samples: int, seed: int, tol: float) -> None:
    result = locally_fine_detect(jacobian, x0, geninv0, radius, samples, seed=seed, tol=tol)
    if not result.fine:
        raise NotGeneralizedRegularError(
            f"x0 is not generalized regular: {result.reason} at {result.witness.tolist()}",
            witness=result.witness,
        )


def _check_base_operator(jacobian: VectorMap, x0: np.ndarray, geninv0: GenInverse) -> np.ndarray:
    t0 = as_operator(jacobian(x0), "jacobian(x0)")
    if t0.shape != geninv0.a.shape or spectral_norm(t0 - geninv0.a) > 1e-8 * (1.0 + spectral_norm(t0)):
        raise InvalidInputError("jacobian(x0) does not match the operator of geninv0")
    return t0


def alpha_field_kernel(jacobian: VectorMap, x0, geninv0: GenInverse,
                       check_regular: bool = True,
                       radius: float = FINE_RADIUS,
                       samples: int = FINE_SAMPLES,
                       seed: int = 0,
                       jacobian_mode: str = "analytic",
                       tol: float = DEFAULT_TOL) -> AlphaField:
    """
    alpha(x) = P D^-1 restricted to N0, for the kernel family N(f'(x)).

    D = I + T0+(T_x - T0) and P projects onto E* = R(T0+) along N0 = N(T0).
    Bases of N0 and E* are fixed here; alpha(x0) = 0.

    The field does not require T_x to stay in the ball around T0; it only
    fails where D itself becomes singular.

    Raises:
        NotGeneralizedRegularError: sampling around x0 found a bad point
        OutOfNeighborhoodError: (at evaluation) D is numerically singular
    """
    x0 = as_vector(x0, "x0")
    t0 = _check_base_operator(jacobian, x0, geninv0)
    if check_regular:
        _require_generalized_regular(jacobian, x0, geninv0, radius, samples, seed, tol)
    n0 = null_space(t0, tol)
    e_star = geninv0.range_plus
    to_star = e_star.basis.T @ oblique_projection(e_star, n0, tol).projection_onto_first
    a_plus = geninv0.a_plus
    n = x0.size

    def evaluate(x: np.ndarray) -> np.ndarray:
        t = as_operator(jacobian(x), "jacobian")
        d = np.eye(n) + a_plus @ (t - t0)
        s = sla.svdvals(d)
        if s[-1] <= tol * s[0] * n:
            raise OutOfNeighborhoodError(f"D is singular at {x.tolist()}", point=x)
        return to_star @ sla.solve(d, n0.basis)

    logger.info(f"kernel alpha field: dim N0 = {n0.dim}, dim E* = {e_star.dim}")
    return AlphaField(n0, e_star, evaluate, jacobian_mode)


def alpha_field_generic(family: DistributionFamily, m0: SubspaceBasis, e_star: SubspaceBasis,
                        tol: float = DEFAULT_TOL) -> AlphaField:
    """
    alpha(x) = coordinate operator from M0 to M(x) along E*.

    Raises:
        NotComplementaryError: M0 is not a complement of E*
        NotCofinalError: (at evaluation) M(x) is not a complement of E*
    """
    if not cofinal_member(m0, e_star, tol):
        raise NotComplementaryError("M0 is not a complement of E*")

    def evaluate(x: np.ndarray) -> np.ndarray:
        m_x = family.subspace(x)
        if not cofinal_member(m_x, e_star, tol):
            raise NotCofinalError(f"M(x) is not a complement of E* at {x.tolist()}", point=x)
        return coordinate_operator(m0, m_x, e_star, tol).alpha

    return AlphaField(m0, e_star, evaluate)


def _field_in_problem_bases(problem: LeafProblem,
                            field: Union[AlphaField, VectorMap]) -> Tuple[VectorMap, str]:
    if not isinstance(field, AlphaField):
        return field, "analytic"
    if not (same_subspace(field.m0, problem.m0) and same_subspace(field.e_star, problem.e_star)):
        raise InvalidInputError("alpha field and leaf problem use different subspaces")
    to_field = field.m0.basis.T @ problem.m0.basis
    from_field = problem.e_star.basis.T @ field.e_star.basis
    return (lambda x: from_field @ field(x) @ to_field), field.jacobian_mode


def integrate_leaf(problem: LeafProblem, field: Union[AlphaField, VectorMap], extent,
                   step: float = DEFAULT_STEP, nodes: int = DEFAULT_NODES,
                   parallel: bool = False, max_workers: Optional[int] = None) -> LeafSample:
    """
    Integrate psi' = alpha(z + psi) over a tensor grid centred on z0.

    Lines are integrated outward from the centre one axis at a time, each grid
    segment with ceil(length / step) classical RK4 substeps. For dim M0 >= 2 the
    sweep is repeated with the reversed axis order; the per-node difference is
    the integrability residual, flagged when it exceeds 100 step^4.

    Args:
        problem: validated leaf problem
        field: AlphaField, or a callable returning alpha(x) in the problem's bases
        extent: half-width of the grid, scalar or per axis
        step: RK4 step length
        nodes: odd number of nodes per axis
        parallel: integrate independent lines of a sweep phase on a thread pool

    Raises:
        AbortedLeafError: the field raised; carries the partial sample
        DivergenceError: the state became non-finite; carries the partial sample
    """
    if not step > 0:
        raise InvalidInputError(f"step must be positive, got {step}")
    k, l = problem.m0.dim, problem.e_star.dim
    z0, w0 = problem.coordinates(problem.base_point)
    axes = tensor_grid(z0, extent, nodes)
    alpha, mode = _field_in_problem_bases(problem, field)
    q, s = problem.m0.basis, problem.e_star.basis
    center = nodes // 2

    def node(idx: Sequence[int]) -> np.ndarray:
        return np.array([axes[j][idx[j]] for j in range(k)])

    def rate(z: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"non-finite leaf value near z = {z.tolist()}")
        x = q @ z + s @ w
        try:
            a = np.asarray(alpha(x), dtype=float)
        except Exception as e:
            raise AbortedLeafError(f"alpha field failed at {x.tolist()}: {e}") from e
        if a.shape != (l, k):
            raise AbortedLeafError(f"alpha field returned shape {a.shape}, expected {(l, k)}")
        return a[:, axis]

    def segment(z_a: np.ndarray, axis: int, delta: float, w: np.ndarray) -> np.ndarray:
        m = max(1, int(np.ceil(abs(delta) / step - 1e-9)))
        h = delta / m
        for i in range(m):
            z = z_a.copy()
            z[axis] = z_a[axis] + i * h
            zh = z.copy()
            zh[axis] += 0.5 * h
            z1 = z.copy()
            z1[axis] += h
            k1 = rate(z, w, axis)
            k2 = rate(zh, w + 0.5 * h * k1, axis)
            k3 = rate(zh, w + 0.5 * h * k2, axis)
            k4 = rate(z1, w + h * k3, axis)
            w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return w

    def line(psi: np.ndarray, axis: int, seed: Tuple[int, ...]) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
        out = []
        for direction in (1, -1):
            w = psi[seed].copy()
            idx = list(seed)
            while 0 <= idx[axis] + direction < nodes:
                z_a = node(idx)
                idx[axis] += direction
                z_b = node(idx)
                w = segment(z_a, axis, z_b[axis] - z_a[axis], w)
                if not np.all(np.isfinite(w)):
                    raise DivergenceError(f"non-finite leaf value at z = {z_b.tolist()}")
                out.append((tuple(idx), w.copy()))
        return out

    def partial_sample(psi: np.ndarray, filled: np.ndarray) -> LeafSample:
        mask = filled.reshape(-1)
        grid = _mesh(axes)[mask]
        psi_flat = psi.reshape(filled.size, l)[mask]
        return LeafSample(
            axes=axes, grid=grid, psi_values=psi_flat, points=grid @ q.T + psi_flat @ s.T,
            integrability_residual=np.zeros(grid.shape[0]), base_point=problem.base_point,
            z0=z0, psi0=w0, m0=problem.m0, e_star=problem.e_star, method="rk4", step=step,
            jacobian_mode=mode, complete=False, integrable=False,
        )

    def sweep(order: Tuple[int, ...]) -> np.ndarray:
        psi = np.full((nodes,) * k + (l,), np.nan)
        filled = np.zeros((nodes,) * k, dtype=bool)
        psi[(center,) * k] = w0
        filled[(center,) * k] = True
        try:
            for p, axis in enumerate(order):
                seeds = []
                for combo in itertools.product(range(nodes), repeat=p):
                    idx = [center] * k
                    for ax, v in zip(order[:p], combo):
                        idx[ax] = v
                    seeds.append(tuple(idx))
                for results in map_lines(partial(line, psi, axis), seeds, parallel, max_workers):
                    for idx, w in results:
                        psi[idx] = w
                        filled[idx] = True
                logger.debug(f"sweep {order}: axis {axis} done ({len(seeds)} lines)")
        except (AbortedLeafError, DivergenceError) as e:
            if e.partial is None:
                e.partial = partial_sample(psi, filled)
            raise
        return psi

    psi = sweep(tuple(range(k)))
    if k >= 2:
        other = sweep(tuple(reversed(range(k))))
        mixed = np.linalg.norm(psi - other, axis=-1).reshape(-1)
    else:
        mixed = np.zeros(nodes ** k)

    threshold = 100.0 * step ** 4
    integrable = bool(np.max(mixed) <= threshold)
    if not integrable:
        logger.warning(f"mixed-path residual {np.max(mixed):.3e} exceeds {threshold:.3e}; "
                       f"the family looks non-integrable")

    grid = _mesh(axes)
    psi_flat = psi.reshape(grid.shape[0], l)
    logger.info(f"integrated leaf on {grid.shape[0]} nodes, step {step:g}, "
                f"max mixed-path residual {np.max(mixed):.3e}")
    return LeafSample(
        axes=axes, grid=grid, psi_values=psi_flat, points=grid @ q.T + psi_flat @ s.T,
        integrability_residual=mixed, base_point=problem.base_point, z0=z0, psi0=w0,
        m0=problem.m0, e_star=problem.e_star, method="rk4", step=step,
        jacobian_mode=mode, complete=True, integrable=integrable,
    )


def leaf_membership(sample: LeafSample, family: DistributionFamily, tol: float = DEFAULT_TOL) -> bool:
    """True iff M(x) is a complement of E* at every reconstructed point."""
    return all(cofinal_member(family.subspace(x), sample.e_star, tol) for x in sample.points)


def leaf_tangency_residual(sample: LeafSample, family: DistributionFamily) -> float:
    """
    Largest relative distance of a central-difference tangent of the leaf
    from M(x), over interior grid nodes.
    """
    k = sample.m0.dim
    counts = [len(a) for a in sample.axes]
    if not sample.complete or k == 0 or min(counts) < 3:
        return 0.0
    pts = sample.points.reshape(tuple(counts) + (-1,))
    worst = 0.0
    for idx in itertools.product(*(range(1, c - 1) for c in counts)):
        proj = family.subspace(pts[idx]).projector()
        for axis in range(k):
            up, down = list(idx), list(idx)
            up[axis] += 1
            down[axis] -= 1
            h = sample.axes[axis][up[axis]] - sample.axes[axis][down[axis]]
            tangent = (pts[tuple(up)] - pts[tuple(down)]) / h
            norm = np.linalg.norm(tangent)
            if norm > 0:
                worst = max(worst, float(np.linalg.norm(tangent - proj @ tangent) / norm))
    return worst


@dataclass(frozen=True, eq=False)
class PhiMap:
    """
    phi(x) = T0+(f(x) - f(x0)) + P x with P the projection onto N0 along E*.

    phi'(x) = I + T0+(f'(x) - T0). phi0 = P phi^-1 and phi1 = (I - P) phi^-1;
    phi0 restricts to the identity on N0, so the leaf is psi = phi1 on N0.
    """
    f: VectorMap
    jacobian: VectorMap
    base_point: np.ndarray
    geninv0: GenInverse
    n0: SubspaceBasis
    e_star: SubspaceBasis
    onto_n0: np.ndarray
    f0: np.ndarray
    jacobian_mode: str = "analytic"
    tol: float = DEFAULT_TOL

    def _f(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.f(x), dtype=float))

    def forward(self, x) -> np.ndarray:
        x = as_vector(x, "x")
        return self.geninv0.a_plus @ (self._f(x) - self.f0) + self.onto_n0 @ x

    def derivative(self, x) -> np.ndarray:
        x = as_vector(x, "x")
        t = as_operator(self.jacobian(x), "jacobian")
        return np.eye(x.size) + self.geninv0.a_plus @ (t - self.geninv0.a)

    def inverse(self, y) -> np.ndarray:
        """
        Damped Newton solve of phi(x) = y from the guess y + (I - P) x0.

        Raises:
            InverseFailureError: no convergence to 1e-12 (1 + ||y||) in 50 steps
        """
        y = as_vector(y, "y")
        guess = y + (self.base_point - self.onto_n0 @ self.base_point)
        result = newton_solve(lambda x: self.forward(x) - y, self.derivative, guess,
                              tol=1e-12 * (1.0 + np.linalg.norm(y)), maxiter=50, max_halvings=20)
        if not result.success:
            raise InverseFailureError(
                f"phi inversion failed at y = {y.tolist()}: {result.message} "
                f"(residual {result.residual:.3e})",
                residual=result.residual,
            )
        return result.x

    def phi0(self, y) -> np.ndarray:
        return self.onto_n0 @ self.inverse(y)

    def phi1(self, y) -> np.ndarray:
        x = self.inverse(y)
        return x - self.onto_n0 @ x

    def z0(self) -> np.ndarray:
        return self.n0.basis.T @ (self.onto_n0 @ self.base_point)

    def psi(self, z) -> np.ndarray:
        """E*-coordinates of the leaf over the N0-coordinate z."""
        return self.e_star.basis.T @ self.phi1(self.n0.basis @ as_vector(z, "z"))


def phi_map(f: VectorMap, jacobian: Optional[VectorMap], x0, geninv0: GenInverse,
            check_regular: bool = True,
            radius: float = FINE_RADIUS,
            samples: int = FINE_SAMPLES,
            seed: int = 0,
            tol: float = DEFAULT_TOL) -> PhiMap:
    """
    Build phi for f at a generalized regular point x0 with E* = R(T0+).

    A missing jacobian is replaced by central differences of f.
    """
    x0 = as_vector(x0, "x0")
    mode = "analytic"
    if jacobian is None:
        jacobian = partial(central_difference_jacobian, f)
        mode = "central-difference"
    _check_base_operator(jacobian, x0, geninv0)
    if check_regular:
        _require_generalized_regular(jacobian, x0, geninv0, radius, samples, seed, tol)
    n0 = null_space(geninv0.a, tol)
    e_star = geninv0.range_plus
    onto_n0 = oblique_projection(n0, e_star, tol).projection_onto_first
    f0 = np.atleast_1d(np.asarray(f(x0), dtype=float))
    return PhiMap(f, jacobian, x0, geninv0, n0, e_star, onto_n0, f0, mode, tol)


def phi_leaf(phi: PhiMap, axis_nodes: Sequence[np.ndarray], parallel: bool = False,
             max_workers: Optional[int] = None) -> LeafSample:
    """
    psi(z) = phi1(phi0^-1(z)) on the tensor grid spanned by axis_nodes (N0-coordinates).

    level_residual holds |f(z + psi(z)) - f(x0)| per node.
    """
    axes = [np.asarray(a, dtype=float) for a in axis_nodes]
    if len(axes) != phi.n0.dim:
        raise InvalidInputError(f"{len(axes)} axes given, dim N0 is {phi.n0.dim}")
    grid = _mesh(axes)
    q = phi.n0.basis

    def solve(z: np.ndarray) -> np.ndarray:
        return phi.inverse(q @ z)

    points = np.array(list(map_lines(solve, list(grid), parallel, max_workers)))
    e_part = points - points @ phi.onto_n0.T
    psi_values = e_part @ phi.e_star.basis
    level = np.array([np.linalg.norm(phi._f(x) - phi.f0) for x in points])
    logger.info(f"phi leaf on {grid.shape[0]} nodes, max level residual {np.max(level):.3e}")
    return LeafSample(
        axes=axes, grid=grid, psi_values=psi_values, points=points,
        integrability_residual=np.zeros(grid.shape[0]), base_point=phi.base_point,
        z0=phi.z0(), psi0=phi.e_star.basis.T @ (phi.base_point - phi.onto_n0 @ phi.base_point),
        m0=phi.n0, e_star=phi.e_star, method="phi", step=0.0,
        jacobian_mode=phi.jacobian_mode, level_residual=level,
    )


@dataclass(frozen=True)
class FactorizationResidual:
    """
    At a point x with h = u(x): projected is the R(T0)-component of
    f(x) - f(x0) - T0 h (identically zero up to roundoff); full is the whole
    residual, which is O(||h||^2).
    """
    h: Tuple[float, ...]
    projected: float
    full: float


@dataclass(frozen=True, eq=False)
class NormalFormMap:
    """u(x) = T0+(f(x) - f(x0)) + (I - T0+ T0)(x - x0)."""
    f: VectorMap
    jacobian: VectorMap
    base_point: np.ndarray
    geninv0: GenInverse
    f0: np.ndarray

    def _f(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.f(x), dtype=float))

    def __call__(self, x) -> np.ndarray:
        x = as_vector(x, "x")
        a, a_plus = self.geninv0.a, self.geninv0.a_plus
        return a_plus @ (self._f(x) - self.f0) + (x - self.base_point) - a_plus @ (a @ (x - self.base_point))

    def derivative(self, x) -> np.ndarray:
        x = as_vector(x, "x")
        t = as_operator(self.jacobian(x), "jacobian")
        return np.eye(x.size) + self.geninv0.a_plus @ (t - self.geninv0.a)

    def inverse(self, h) -> np.ndarray:
        h = as_vector(h, "h")
        result = newton_solve(lambda x: self(x) - h, self.derivative, self.base_point + h,
                              tol=1e-12 * (1.0 + np.linalg.norm(h)))
        if not result.success:
            raise InverseFailureError(f"u inversion failed at h = {h.tolist()}: {result.message}",
                                      residual=result.residual)
        return result.x

    def residuals(self, points: Sequence[np.ndarray]) -> List[FactorizationResidual]:
        a, a_plus = self.geninv0.a, self.geninv0.a_plus
        out = []
        for x in points:
            x = as_vector(x, "x")
            h = self(x)
            full = self._f(x) - self.f0 - a @ h
            out.append(FactorizationResidual(
                h=tuple(float(v) for v in h),
                projected=float(np.linalg.norm(a @ (a_plus @ full))),
                full=float(np.linalg.norm(full)),
            ))
        return out


def normal_form_u(f: VectorMap, x0, geninv0: GenInverse, jacobian: Optional[VectorMap] = None,
                  check_regular: bool = True,
                  radius: float = FINE_RADIUS,
                  samples: int = FINE_SAMPLES,
                  seed: int = 0,
                  tol: float = DEFAULT_TOL) -> NormalFormMap:
    """
    The straightening map u with u(x0) = 0 and u'(x0) = I.

    A missing jacobian is replaced by central differences of f.
    """
    x0 = as_vector(x0, "x0")
    if jacobian is None:
        jacobian = partial(central_difference_jacobian, f)
    _check_base_operator(jacobian, x0, geninv0)
    if check_regular:
        _require_generalized_regular(jacobian, x0, geninv0, radius, samples, seed, tol)
    f0 = np.atleast_1d(np.asarray(f(x0), dtype=float))
    return NormalFormMap(f, jacobian, x0, geninv0, f0)

#!/usr/bin/env python3
"""
geninv-leaves command line.

Each subcommand reads a v1 problem file, runs one family of operations and
writes a JSON report (and for `leaf` a CSV of the sampled leaf). Reports hold
no timestamps, so identical input and seed give byte-identical output.

Exit codes: 0 success, 2 input or precondition violation, 3 numerical
divergence, 1 anything else.
"""
import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .config import Settings, load_settings
from .core.critpoint import (
    ConstraintSpec,
    best_rank_approximation,
    criticality_residual,
    matrix_constraint,
    rank_preserving_neighbor,
)
from .core.errors import (
    AbortedLeafError,
    DivergenceError,
    GenInvLeavesError,
    ProblemFileError,
)
from .core.families import LevelSetFamily, builtin_family
from .core.frobenius import (
    LeafSample,
    alpha_field_kernel,
    integrate_leaf,
    kernel_family,
    leaf_problem,
    phi_leaf,
    phi_map,
    tensor_grid,
)
from .core.geninv import (
    GenInverse,
    ConditionReport,
    axiom_residuals,
    condition_report,
    construct_geninv,
    moore_penrose_geninv,
    perturbation_context,
    perturbation_projections,
    perturbed_inverse,
    rank_class_preserved,
)
from .core.linalg import SubspaceBasis, null_space, numerical_rank, range_space, spectral_norm
from .core.rankmanifold import (
    anchor_chart,
    chart_forward,
    chart_inverse,
    leaf_psi_rank,
    rectification_residual,
    stratum_membership,
)
from .models import (
    ChartSampleReport,
    ConditionFlags,
    CritCheckReport,
    GenInvReport,
    LeafPointReport,
    LeafReport,
    PerturbReport,
    ProblemFile,
    RankChartReport,
)
from .utils.matrix_io import load_problem, write_leaf_csv

logger = logging.getLogger(__name__)

# problem-file [params] keys that override Settings fields
_PARAM_KEYS = {
    "tol": ("rank_tol", float),
    "step": ("step", float),
    "extent": ("extent", float),
    "nodes": ("nodes", int),
    "fine_radius": ("fine_radius", float),
    "fine_samples": ("fine_samples", int),
    "seed": ("seed", int),
}

NEIGHBOR_DISTANCE = 1e-2


def _settings_for(problem: ProblemFile, args: argparse.Namespace, base: Settings) -> Settings:
    from_file = {}
    for key, (field, kind) in _PARAM_KEYS.items():
        from_file[field] = problem.param_float(key) if kind is float else problem.param_int(key)
    from_flags = {"rank_tol": args.tol, "step": args.step, "extent": args.extent, "seed": args.seed}
    return base.merged(from_file).merged(from_flags)


def _tolerances(settings: Settings, *fields: str) -> Dict[str, float]:
    data = settings.model_dump()
    return {name: data[name] for name in ("rank_tol",) + fields}


def _flags(report: ConditionReport) -> ConditionFlags:
    return ConditionFlags(**dataclasses.asdict(report), consistent=report.consistent)


def _radius(value: float) -> Optional[float]:
    return None if np.isinf(value) else value


def _geninv_from(problem: ProblemFile, a: np.ndarray, tol: float) -> GenInverse:
    """Complements from RANGE_PLUS / NULL_PLUS columns; orthogonal ones when absent."""
    range_plus = problem.optional_matrix("RANGE_PLUS")
    null_plus = problem.optional_matrix("NULL_PLUS")
    rp = SubspaceBasis.span(range_plus, tol) if range_plus is not None else range_space(a.T, tol)
    np_ = SubspaceBasis.span(null_plus, tol) if null_plus is not None else null_space(a.T, tol)
    return construct_geninv(a, rp, np_, tol)


def _is_moore_penrose(problem: ProblemFile) -> bool:
    return not (problem.has_matrix("RANGE_PLUS") or problem.has_matrix("NULL_PLUS"))


def cmd_geninv(problem: ProblemFile, settings: Settings, args: argparse.Namespace) -> GenInvReport:
    """A+ for the prescribed complements, its axiom residuals and the conditions at T (or A)."""
    tol = settings.rank_tol
    a = problem.matrix("A")
    gi = _geninv_from(problem, a, tol)
    t = problem.optional_matrix("T")
    ctx = perturbation_context(gi, a if t is None else t, tol)
    return GenInvReport(
        a=a.tolist(),
        a_plus=gi.a_plus.tolist(),
        rank=numerical_rank(a, tol),
        range_plus_dim=gi.range_plus.dim,
        null_plus_dim=gi.null_plus.dim,
        moore_penrose=_is_moore_penrose(problem),
        axiom_residuals=list(axiom_residuals(gi)),
        conditions=_flags(condition_report(ctx, tol)),
        tolerances=_tolerances(settings),
    )


def cmd_perturb(problem: ProblemFile, settings: Settings, args: argparse.Namespace) -> PerturbReport:
    """
    Ball membership, the seven conditions, rank class, B = A+ C^-1 and the
    P1/P2 idempotents for a perturbation T of A.
    """
    tol = settings.rank_tol
    a = problem.matrix("A")
    gi = _geninv_from(problem, a, tol)
    ctx = perturbation_context(gi, problem.matrix("T"), tol)
    ctx.require_ball()
    conditions = condition_report(ctx, tol)
    projections = perturbation_projections(ctx, tol)
    b, b_residuals = None, None
    if conditions.range_misses_null_plus:
        inverse = perturbed_inverse(ctx, tol)
        b, b_residuals = inverse.a_plus.tolist(), list(axiom_residuals(inverse))
    else:
        logger.info("R(T) meets N(A+); no perturbed inverse in this class")
    return PerturbReport(
        a=a.tolist(),
        a_plus=gi.a_plus.tolist(),
        t=ctx.t.tolist(),
        distance=ctx.distance,
        radius=_radius(ctx.radius),
        conditions=_flags(conditions),
        rank_class_preserved=rank_class_preserved(ctx, tol),
        b=b,
        b_axiom_residuals=b_residuals,
        p1_idempotency=projections.p1_idempotency,
        p2_idempotency=projections.p2_idempotency,
        extra_kernel_dim=projections.extra_kernel.dim,
        codomain_split=projections.codomain_split,
        domain_split=projections.domain_split,
        tolerances=_tolerances(settings),
    )


def _family_for(problem: ProblemFile) -> LevelSetFamily:
    name = problem.param_str("family")
    if name is None:
        raise ProblemFileError("leaf problems need a 'family' parameter")
    params = {}
    if name == "quadratic":
        params = {"Q": problem.matrix("Q"), "b": problem.vector("b"),
                  "c": problem.param_float("c", 0.0), "x0": problem.vector("x0")}
    return builtin_family(name, params)


def _csv_path(args: argparse.Namespace) -> Path:
    if args.out:
        return Path(args.out).with_suffix(".csv")
    return Path(Path(args.input).stem + ".csv")


def _fill_level_residual(sample: LeafSample, family: LevelSetFamily) -> None:
    if sample.level_residual is None:
        f0 = family.f(family.base_point)
        sample.level_residual = np.array([np.linalg.norm(family.f(x) - f0) for x in sample.points])


def _sup_error(sample: LeafSample, family: LevelSetFamily) -> Optional[float]:
    """Largest distance of the E*-part of the leaf from the closed form."""
    if family.exact_height is None:
        return None
    m_part = sample.grid @ sample.m0.basis.T
    e_part = sample.psi_values @ sample.e_star.basis.T
    errors = [np.linalg.norm(e - family.exact_height(p)) for p, e in zip(m_part, e_part)]
    return float(max(errors)) if errors else 0.0


def _rk4_leaf(family: LevelSetFamily, gi: GenInverse, settings: Settings,
              nodes: int, check_regular: bool, parallel: bool) -> LeafSample:
    tol = settings.rank_tol
    x0 = family.base_point
    field = alpha_field_kernel(family.jacobian, x0, gi, check_regular=check_regular,
                               radius=settings.fine_radius, samples=settings.fine_samples,
                               seed=settings.seed, tol=tol)
    problem = leaf_problem(x0, kernel_family(family.jacobian, family.ambient_dim, tol), gi.range_plus, tol=tol)
    return integrate_leaf(problem, field, settings.extent, step=settings.step, nodes=nodes, parallel=parallel)


def _phi_leaf(family: LevelSetFamily, gi: GenInverse, settings: Settings,
              nodes: int, check_regular: bool, parallel: bool) -> LeafSample:
    phi = phi_map(family.f, family.jacobian, family.base_point, gi, check_regular=check_regular,
                  radius=settings.fine_radius, samples=settings.fine_samples,
                  seed=settings.seed, tol=settings.rank_tol)
    return phi_leaf(phi, tensor_grid(phi.z0(), settings.extent, nodes), parallel=parallel)


def cmd_leaf(problem: ProblemFile, settings: Settings, args: argparse.Namespace) -> LeafReport:
    """
    Sample the leaf of N(f'(x)) through the family's base point on a grid,
    by RK4 (`method = rk4`), by inverting phi (`phi`), or both for comparison.

    The CSV lands next to the report; on divergence a partial CSV flagged
    `complete = false` is written before the error propagates.
    """
    tol = settings.rank_tol
    family = _family_for(problem)
    method = problem.param_str("method", "rk4")
    if method not in ("rk4", "phi", "both"):
        raise ProblemFileError(f"method must be rk4, phi or both, got {method!r}", problem.param_lines.get("method"))
    nodes = settings.nodes
    check_regular = problem.param_bool("check_regular", True)
    csv_path = _csv_path(args)

    gi = moore_penrose_geninv(family.jacobian(family.base_point), tol)
    try:
        if method == "phi":
            sample = _phi_leaf(family, gi, settings, nodes, check_regular, args.parallel)
        else:
            sample = _rk4_leaf(family, gi, settings, nodes, check_regular, args.parallel)
    except (DivergenceError, AbortedLeafError) as e:
        if e.partial is not None:
            _fill_level_residual(e.partial, family)
            write_leaf_csv(csv_path, e.partial)
            logger.error(f"partial leaf ({e.partial.grid.shape[0]} nodes) written to {csv_path}")
        raise

    agreement = None
    if method == "both":
        other = _phi_leaf(family, gi, settings, nodes, check_regular, args.parallel)
        agreement = float(np.max(np.linalg.norm(sample.points - other.points, axis=1)))
        logger.info(f"rk4 and phi leaves agree to {agreement:.3e}")

    _fill_level_residual(sample, family)
    write_leaf_csv(csv_path, sample)
    return LeafReport(
        family=family.name,
        method=sample.method,
        base_point=family.base_point.tolist(),
        leaf_dim=sample.m0.dim,
        codim=sample.e_star.dim,
        nodes=nodes,
        extent=settings.extent,
        step=settings.step if sample.method == "rk4" else 0.0,
        jacobian_mode=sample.jacobian_mode,
        complete=sample.complete,
        integrable=sample.integrable,
        max_integrability_residual=sample.max_integrability_residual,
        max_level_residual=float(np.max(sample.level_residual)),
        sup_error=_sup_error(sample, family),
        solver_agreement=agreement,
        csv=csv_path.name,
        tolerances=_tolerances(settings, "step", "fine_radius"),
    )


def _chart_sample(ctx, name: str, x: np.ndarray) -> ChartSampleReport:
    in_w, in_v1 = ctx.in_w(x), ctx.in_v1(x)
    report = ChartSampleReport(name=name, in_w=in_w, in_v1=in_v1, rank=numerical_rank(x, ctx.tol))
    if in_v1:
        d = chart_forward(ctx, x)
        report.d_x = d.tolist()
        report.rectification_residual = rectification_residual(ctx, x)
        if ctx.in_v1(d):
            report.round_trip_error = spectral_norm(chart_inverse(ctx, d) - x)
    if in_w:
        report.rank_preserved = stratum_membership(ctx, x)
    return report


def cmd_rankchart(problem: ProblemFile, settings: Settings, args: argparse.Namespace) -> RankChartReport:
    """Chart the rank stratum at anchor A; samples X*, leaf inputs Z* (in M0)."""
    tol = settings.rank_tol
    a = problem.matrix("A")
    ctx = anchor_chart(a, _geninv_from(problem, a, tol), tol)
    samples = [_chart_sample(ctx, name, problem.matrix(name)) for name in problem.matrix_names("X")]
    leaf_points = []
    for name in problem.matrix_names("Z"):
        z = problem.matrix(name)
        psi = leaf_psi_rank(ctx, z)
        leaf_points.append(LeafPointReport(name=name, psi=psi.tolist(), point=(z + psi).tolist(),
                                           rank=numerical_rank(z + psi, tol)))
    return RankChartReport(
        anchor=a.tolist(),
        rank=ctx.rank,
        dim_m0=ctx.m0.dim,
        dim_e_star=ctx.e_star.dim,
        w_radius=_radius(ctx.w_radius),
        samples=samples,
        leaf_points=leaf_points,
        tolerances=_tolerances(settings),
    )


def cmd_critcheck(problem: ProblemFile, settings: Settings, args: argparse.Namespace) -> CritCheckReport:
    """
    Eckart-Young mode (matrix B, param rank): residual at the truncated SVD and
    at a seeded rank-preserving neighbour. Explicit mode (TANGENT, GRADIENT,
    optional X0): the residual of the given data.
    """
    tol = settings.rank_tol
    if problem.has_matrix("B"):
        b = problem.matrix("B")
        k = problem.param_int("rank")
        if k is None:
            raise ProblemFileError("eckart-young critcheck needs a 'rank' parameter")
        x = best_rank_approximation(b, k)
        neighbor = rank_preserving_neighbor(x, k, NEIGHBOR_DISTANCE, settings.seed)
        return CritCheckReport(
            mode="eckart-young",
            residual=criticality_residual(matrix_constraint(x, b, tol)),
            rank=k,
            point=x.tolist(),
            neighbor_residual=criticality_residual(matrix_constraint(neighbor, b, tol)),
            neighbor_distance=float(np.linalg.norm(neighbor - x)),
            seed=settings.seed,
            tolerances=_tolerances(settings),
        )
    tangent = problem.matrix("TANGENT")
    gradient = problem.vector("GRADIENT")
    x0 = problem.vector("X0") if problem.has_matrix("X0") else np.zeros(gradient.size)
    spec = ConstraintSpec(SubspaceBasis.span(tangent, tol), x0, gradient)
    return CritCheckReport(
        mode="explicit",
        residual=criticality_residual(spec),
        point=[x0.tolist()],
        tolerances=_tolerances(settings),
    )


COMMANDS: Dict[str, Callable] = {
    "geninv": cmd_geninv,
    "perturb": cmd_perturb,
    "leaf": cmd_leaf,
    "rankchart": cmd_rankchart,
    "critcheck": cmd_critcheck,
}

# problem kinds each subcommand accepts
_ACCEPTS = {
    "geninv": ("geninv", "perturb"),
    "perturb": ("perturb",),
    "leaf": ("leaf",),
    "rankchart": ("rankchart",),
    "critcheck": ("critcheck",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geninv-leaves",
        description="Generalized inverses, kernel-distribution leaves and fixed-rank charts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        cmd = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        cmd.add_argument("--input", required=True, metavar="PATH", help="v1 problem file")
        cmd.add_argument("--out", metavar="PATH", help="report path (default: stdout)")
        cmd.add_argument("--step", type=float, metavar="R", help="RK4 step length")
        cmd.add_argument("--extent", type=float, metavar="R", help="leaf grid half-width")
        cmd.add_argument("--tol", type=float, metavar="R", help="relative rank tolerance")
        cmd.add_argument("--seed", type=int, metavar="N", help="sampler seed")
        cmd.add_argument("--parallel", action="store_true", help="integrate grid lines on a thread pool")
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        base = load_settings()
    except GenInvLeavesError as e:
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code

    logging.basicConfig(
        level=getattr(logging, base.log_level.upper(), logging.WARNING),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    try:
        problem = load_problem(args.input)
        if problem.kind not in _ACCEPTS[args.command]:
            raise ProblemFileError(f"problem kind {problem.kind!r} cannot be run by '{args.command}'")
        settings = _settings_for(problem, args, base)
        logger.info(f"{args.command}: {args.input} with {settings.model_dump()}")
        report = COMMANDS[args.command](problem, settings, args)
        _emit(report.model_dump_json(indent=2) + "\n", args.out)
    except GenInvLeavesError as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    except Exception as e:
        logger.error(f"{args.command} crashed: {e}", exc_info=True)
        sys.stderr.write(f"internal error: {e}\n")
        return 1
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Numerical core: generalized inverses, coordinate operators, leaves and rank charts."""

from .errors import (
    GenInvLeavesError,
    PreconditionError,
    NumericalDivergenceError,
    DegenerateConstraintWarning,
)
from .linalg import (
    DEFAULT_TOL,
    SubspaceBasis,
    SplitPair,
    numerical_rank,
    null_space,
    range_space,
    oblique_projection,
    is_complement,
    same_subspace,
    contains,
    intersection_dim,
    image_space,
    flatten,
    unflatten,
)
from .geninv import (
    GenInverse,
    PerturbationContext,
    ConditionReport,
    construct_geninv,
    moore_penrose_geninv,
    axiom_residuals,
    perturbation_context,
    condition_report,
    perturbed_inverse,
    rank_class_preserved,
    perturbation_projections,
    locally_fine_detect,
    combined_inverse,
    independence_radius,
    geninv_independence_check,
)
from .coords import CoordinateOperator, coordinate_operator, graph_subspace, cofinal_member
from .frobenius import (
    DistributionFamily,
    LeafProblem,
    LeafSample,
    AlphaField,
    kernel_family,
    subspace_family,
    leaf_problem,
    tensor_grid,
    alpha_field_kernel,
    alpha_field_generic,
    integrate_leaf,
    phi_map,
    phi_leaf,
    normal_form_u,
    leaf_membership,
    leaf_tangency_residual,
    central_difference_jacobian,
)
from .families import LevelSetFamily, circle, sphere, quadratic, builtin_family
from .rankmanifold import (
    OperatorPoint,
    ChartData,
    operator_point,
    anchor_chart,
    tangent_space,
    complement_space,
    normal_component,
    tangent_projection,
    chart_forward,
    chart_inverse,
    alpha_tangent,
    leaf_psi_rank,
    leaf_point,
    stratum_membership,
    rectification_residual,
    atlas_transition_check,
)
from .critpoint import (
    ConstraintSpec,
    criticality_residual,
    sweep_candidates,
    best_rank_approximation,
    frobenius_distance_gradient,
    matrix_constraint,
    rank_preserving_neighbor,
)

__all__ = [
    "GenInvLeavesError", "PreconditionError", "NumericalDivergenceError", "DegenerateConstraintWarning",
    "DEFAULT_TOL", "SubspaceBasis", "SplitPair", "numerical_rank", "null_space", "range_space",
    "oblique_projection", "is_complement", "same_subspace", "contains", "intersection_dim",
    "image_space", "flatten", "unflatten",
    "GenInverse", "PerturbationContext", "ConditionReport", "construct_geninv", "moore_penrose_geninv",
    "axiom_residuals", "perturbation_context", "condition_report", "perturbed_inverse",
    "rank_class_preserved", "perturbation_projections", "locally_fine_detect", "combined_inverse",
    "independence_radius", "geninv_independence_check",
    "CoordinateOperator", "coordinate_operator", "graph_subspace", "cofinal_member",
    "DistributionFamily", "LeafProblem", "LeafSample", "AlphaField", "kernel_family",
    "subspace_family", "leaf_problem", "tensor_grid", "alpha_field_kernel", "alpha_field_generic",
    "integrate_leaf", "phi_map", "phi_leaf", "normal_form_u", "leaf_membership",
    "leaf_tangency_residual", "central_difference_jacobian",
    "LevelSetFamily", "circle", "sphere", "quadratic", "builtin_family",
    "OperatorPoint", "ChartData", "operator_point", "anchor_chart", "tangent_space",
    "complement_space", "normal_component", "tangent_projection", "chart_forward", "chart_inverse",
    "alpha_tangent", "leaf_psi_rank", "leaf_point", "stratum_membership", "rectification_residual",
    "atlas_transition_check",
    "ConstraintSpec", "criticality_residual", "sweep_candidates", "best_rank_approximation",
    "frobenius_distance_gradient", "matrix_constraint", "rank_preserving_neighbor",
]

"""
Report models written by the CLI.

Reports carry no timestamps and echo every tolerance they used, so the same
input and seed always serialize to the same bytes.
"""
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

Matrix = List[List[float]]


class ConditionFlags(BaseModel):
    """The seven equivalent perturbation conditions, in order."""
    range_misses_null_plus: bool
    inverse_axioms_hold: bool
    range_complements_null_plus: bool
    kernel_complements_range_plus: bool
    kernel_projects_onto_null: bool
    kernel_image_in_range: bool
    image_in_range: bool
    consistent: bool


class GenInvReport(BaseModel):
    kind: Literal["geninv"] = "geninv"
    version: Literal["v1"] = "v1"
    a: Matrix
    a_plus: Matrix
    rank: int
    range_plus_dim: int
    null_plus_dim: int
    moore_penrose: bool
    axiom_residuals: List[float]
    conditions: ConditionFlags
    tolerances: Dict[str, float]


class PerturbReport(BaseModel):
    kind: Literal["perturb"] = "perturb"
    version: Literal["v1"] = "v1"
    a: Matrix
    a_plus: Matrix
    t: Matrix
    distance: float
    radius: Optional[float]
    conditions: ConditionFlags
    rank_class_preserved: bool
    b: Optional[Matrix] = None
    b_axiom_residuals: Optional[List[float]] = None
    p1_idempotency: float
    p2_idempotency: float
    extra_kernel_dim: int
    codomain_split: bool
    domain_split: bool
    tolerances: Dict[str, float]


class LeafReport(BaseModel):
    kind: Literal["leaf"] = "leaf"
    version: Literal["v1"] = "v1"
    family: str
    method: Literal["rk4", "phi"]
    base_point: List[float]
    leaf_dim: int
    codim: int
    nodes: int
    extent: float
    step: float
    jacobian_mode: str
    complete: bool
    integrable: bool
    max_integrability_residual: float
    max_level_residual: Optional[float] = None
    sup_error: Optional[float] = None
    solver_agreement: Optional[float] = None
    csv: Optional[str] = None
    tolerances: Dict[str, float]


class ChartSampleReport(BaseModel):
    name: str
    in_w: bool
    in_v1: bool
    d_x: Optional[Matrix] = None
    rectification_residual: Optional[float] = None
    rank: int
    rank_preserved: Optional[bool] = None
    round_trip_error: Optional[float] = None


class LeafPointReport(BaseModel):
    name: str
    psi: Matrix
    point: Matrix
    rank: int


class RankChartReport(BaseModel):
    kind: Literal["rankchart"] = "rankchart"
    version: Literal["v1"] = "v1"
    anchor: Matrix
    rank: int
    dim_m0: int
    dim_e_star: int
    w_radius: Optional[float]
    samples: List[ChartSampleReport] = Field(default_factory=list)
    leaf_points: List[LeafPointReport] = Field(default_factory=list)
    tolerances: Dict[str, float]


class CritCheckReport(BaseModel):
    kind: Literal["critcheck"] = "critcheck"
    version: Literal["v1"] = "v1"
    mode: Literal["eckart-young", "explicit"]
    residual: float
    rank: Optional[int] = None
    point: Optional[Matrix] = None
    neighbor_residual: Optional[float] = None
    neighbor_distance: Optional[float] = None
    seed: Optional[int] = None
    tolerances: Dict[str, float]

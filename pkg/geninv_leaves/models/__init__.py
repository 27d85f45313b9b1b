"""Pydantic models for problem files and reports."""

from .problem import ProblemFile, ProblemKind
from .reports import (
    ConditionFlags,
    GenInvReport,
    PerturbReport,
    LeafReport,
    ChartSampleReport,
    LeafPointReport,
    RankChartReport,
    CritCheckReport,
)

__all__ = [
    "ProblemFile",
    "ProblemKind",
    "ConditionFlags",
    "GenInvReport",
    "PerturbReport",
    "LeafReport",
    "ChartSampleReport",
    "LeafPointReport",
    "RankChartReport",
    "CritCheckReport",
]

"""
Pydantic schemas for datasets, variance quantities, resampling and results
"""
from .dataset import GroupMean, IncidenceSummary, ParseOptions, TotalsSummary, TripletRecord
from .resampling import BootstrapRun, ContrastResult, NaiveDraw, ResampleDraw, StatisticSpec
from .result import CheckResult, ResultDocument, VerificationReport, VerifyConfig
from .variance import (
    CellMap,
    CombinedEstimate,
    ConsistencyDiagnostics,
    LambdaWeights,
    VarianceBounds,
    VarianceComponents,
    VarianceTable,
)

__all__ = [
    "TripletRecord",
    "ParseOptions",
    "IncidenceSummary",
    "TotalsSummary",
    "GroupMean",
    "StatisticSpec",
    "NaiveDraw",
    "ResampleDraw",
    "BootstrapRun",
    "ContrastResult",
    "ResultDocument",
    "VerifyConfig",
    "CheckResult",
    "VerificationReport",
    "CellMap",
    "VarianceComponents",
    "LambdaWeights",
    "VarianceBounds",
    "ConsistencyDiagnostics",
    "CombinedEstimate",
    "VarianceTable",
]

"""Interpretable FDIA detection for two-area AGC power systems.

Pipeline: nonlinear AGC simulation -> attack injection -> windowed dataset ->
statistical features -> Kolmogorov-Arnold network -> pruning/fine-tuning ->
symbolic expression extraction -> evaluation reports.
"""

from .errors import (
    AgcKanError,
    DatasetCorruptionError,
    DatasetFormatError,
    DegenerateNetworkError,
    ExpressionEvaluationError,
    InvalidArgumentError,
    SchemaError,
    SimulationDivergedError,
)
from .pipeline import TOOL_VERSION as __version__  # noqa: N811

__all__ = [
    "AgcKanError",
    "DatasetCorruptionError",
    "DatasetFormatError",
    "DegenerateNetworkError",
    "ExpressionEvaluationError",
    "InvalidArgumentError",
    "SchemaError",
    "SimulationDivergedError",
    "__version__",
]

"""RankMatch: semi-supervised label distribution learning with averaged
pseudo-label distributions and pairwise relevance ranking losses."""

from .core import (
    Dataset,
    LabelDistribution,
    LossBreakdown,
    MetricsReport,
    TrainConfig,
    validate_distribution,
)
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "Dataset",
    "LabelDistribution",
    "LossBreakdown",
    "MetricsReport",
    "TrainConfig",
    "validate_distribution",
    "KERNEL_BACKEND",
]
__version__ = "0.1.0"

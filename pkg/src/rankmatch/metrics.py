"""The six standard LDL evaluation metrics.

Distances (lower is better): Chebyshev, Clark, Canberra, KL.
Similarities (higher is better): Intersection, Cosine.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    MetricsReport,
    ZeroVector,
)

KL_FLOOR = 1e-12

_CHEB, _CLARK, _CANB, _KL, _INTER, _COS = range(6)


def _pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(truth, dtype=np.float64).ravel()
    p = np.asarray(pred, dtype=np.float64).ravel()
    if d.shape != p.shape:
        raise DimensionMismatch(f"truth has {d.size} labels, prediction has {p.size}")
    return d[None, :], p[None, :]


def _one(truth, pred, col: int) -> float:
    return float(kernels.metric_rows(*_pair(truth, pred))[0, col])


def chebyshev(truth, pred) -> float:
    return _one(truth, pred, _CHEB)


def clark(truth, pred) -> float:
    """Clark distance; labels absent from both sides contribute 0."""
    return _one(truth, pred, _CLARK)


def canberra(truth, pred) -> float:
    return _one(truth, pred, _CANB)


def kl_metric(truth, pred) -> float:
    """KL(truth || pred) with ``0 ln 0 = 0`` and predictions floored at 1e-12."""
    return _one(truth, pred, _KL)


def intersection(truth, pred) -> float:
    return _one(truth, pred, _INTER)


def cosine(truth, pred) -> float:
    value = _one(truth, pred, _COS)
    if np.isnan(value):
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return value


def metric_matrix(truths, preds) -> np.ndarray:
    """Per-sample metrics as an ``(N, 6)`` array in ``METRIC_NAMES`` order."""
    d = np.asarray(truths, dtype=np.float64)
    p = np.asarray(preds, dtype=np.float64)
    if d.ndim != 2 or p.ndim != 2:
        raise DimensionMismatch("expected 2-D arrays of distributions")
    if len(d) != len(p):
        raise LengthMismatch(f"{len(d)} truths vs {len(p)} predictions")
    if d.shape[1] != p.shape[1]:
        raise DimensionMismatch(f"truth has {d.shape[1]} labels, prediction has {p.shape[1]}")
    return kernels.metric_rows(d, p)


def evaluate_all(truths: Sequence, preds: Sequence) -> MetricsReport:
    """Mean of each metric over all (truth, prediction) pairs."""
    if len(truths) != len(preds):
        raise LengthMismatch(f"{len(truths)} truths vs {len(preds)} predictions")
    if len(truths) == 0:
        raise EmptyInput("evaluate_all needs at least one pair")
    rows = metric_matrix(np.stack([np.asarray(t, dtype=np.float64) for t in truths]),
                         np.stack([np.asarray(p, dtype=np.float64) for p in preds]))
    if np.isnan(rows[:, _COS]).any():
        raise ZeroVector("cosine similarity undefined for a zero vector")
    # column sums run in fixed index order, so the result is order-stable
    means = [sum(rows[:, col].tolist()) / len(rows) for col in range(6)]
    return MetricsReport(*means, sample_count=len(rows))

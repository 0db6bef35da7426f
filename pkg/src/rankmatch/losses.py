"""RankMatch loss terms.

The objective combines a supervised KL loss on weakly augmented labeled
inputs, a KL consistency loss between pseudo-label distributions (PLDs) and
strongly augmented unlabeled predictions, and two pairwise relevance ranking
(PRR) hinge losses:

    total = supervised + consistency + lam * (prr_labeled + prr_unlabeled)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from . import kernels
from .core import (
    DimensionMismatch,
    LabelDistribution,
    LengthMismatch,
    LossBreakdown,
    NegativeTerm,
    NonFiniteLogit,
    TooFewLabels,
)

PRED_FLOOR = 1e-12


@dataclass(frozen=True)
class PairIndicator:
    """A label pair whose source degrees differ by more than the threshold."""

    j: int
    k: int
    direction: Literal["j_over_k", "k_over_j"]
    gap: float

    @property
    def hi(self) -> int:
        return self.j if self.direction == "j_over_k" else self.k

    @property
    def lo(self) -> int:
        return self.k if self.direction == "j_over_k" else self.j


def softmax_rows(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_normalize(logits: Sequence[float]) -> LabelDistribution:
    z = np.asarray(logits, dtype=np.float64).ravel()
    if z.size < 2:
        raise TooFewLabels(f"need at least 2 logits, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteLogit("logits must be finite")
    return LabelDistribution(softmax_rows(z))


def _as_batch(rows, name: str) -> np.ndarray:
    arr = np.asarray([np.asarray(r, dtype=np.float64) for r in rows]) if not isinstance(
        rows, np.ndarray) else rows.astype(np.float64, copy=False)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a list of distributions")
    return arr


def _paired(preds, targets) -> tuple[np.ndarray, np.ndarray]:
    if len(preds) != len(targets):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(targets)} targets")
    h = _as_batch(preds, "preds")
    d = _as_batch(targets, "targets")
    if h.shape[1:] != d.shape[1:]:
        raise DimensionMismatch(f"predictions have {h.shape[1]} labels, targets {d.shape[1]}")
    return h, d


def kl_batch_loss(preds, targets) -> float:
    """Mean over samples of KL(target || pred); 0 for an empty batch."""
    if len(preds) == 0 and len(targets) == 0:
        return 0.0
    h, d = _paired(preds, targets)
    return float(kernels.kl_rows(d, h, PRED_FLOOR).mean())


def supervised_kl_loss(preds_weak, truths) -> float:
    if len(truths) == 0:
        raise LengthMismatch("supervised loss needs a non-empty labeled batch")
    return kl_batch_loss(preds_weak, truths)


def consistency_loss(plds, preds_strong) -> float:
    """KL from each PLD to the prediction on the strongly augmented view."""
    return kl_batch_loss(preds_strong, plds)


def build_pld(
    predict: Callable[[np.ndarray], object],
    x,
    k_weak: int,
    weak_augment: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    rng: np.random.Generator,
) -> LabelDistribution:
    """Average ``predict`` over ``k_weak`` weakly augmented copies of ``x``.

    The result is a plain value; callers treat it as a constant target.
    """
    if k_weak < 1:
        raise ValueError("k_weak must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    acc = None
    for _ in range(k_weak):
        h = np.asarray(predict(weak_augment(x, rng)), dtype=np.float64)
        acc = h.copy() if acc is None else acc + h
    return LabelDistribution(acc / k_weak)


def significant_pairs(source, t: float) -> list[PairIndicator]:
    s = np.asarray(source, dtype=np.float64).ravel()
    out = []
    for j in range(len(s) - 1):
        for k in range(j + 1, len(s)):
            diff = s[j] - s[k]
            if diff > t:
                out.append(PairIndicator(j, k, "j_over_k", float(diff)))
            elif -diff > t:
                out.append(PairIndicator(j, k, "k_over_j", float(-diff)))
    return out


def _check_same_width(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.size} vs {b.size} labels")
    return a, b


def prr_labeled_loss(pred, truth, t: float) -> float:
    """Ranking hinge that also asks the prediction to reproduce the true gap."""
    h, d = _check_same_width(pred, truth)
    loss, _ = kernels.prr_rows(h[None, :], d[None, :], t, True)
    return float(loss[0])


def prr_unlabeled_loss(pred_strong, pld, t: float) -> float:
    """Zero-margin ranking hinge against the PLD's significant pairs."""
    h, p = _check_same_width(pred_strong, pld)
    loss, _ = kernels.prr_rows(h[None, :], p[None, :], t, False)
    return float(loss[0])


def prr_batch_loss(preds, sources, t: float, use_margin: bool) -> float:
    """Per-sample PRR sums averaged over the batch; 0 for an empty batch."""
    if len(preds) == 0 and len(sources) == 0:
        return 0.0
    h, s = _paired(preds, sources)
    loss, _ = kernels.prr_rows(h, s, t, use_margin)
    return float(loss.mean())


def hinge_arguments(preds, sources, t: float, use_margin: bool) -> np.ndarray:
    """Hinge arguments of every significant pair in the batch, flattened.

    Only used to locate kinks during gradient checks.
    """
    h = np.asarray(preds, dtype=np.float64)
    s = np.asarray(sources, dtype=np.float64)
    if h.size == 0:
        return np.zeros(0)
    jj, kk = np.triu_indices(h.shape[1], k=1)
    diff = s[:, jj] - s[:, kk]
    sig = np.abs(diff) > t
    sign = np.sign(diff)
    gap = np.abs(diff) if use_margin else 0.0
    arg = gap - sign * (h[:, jj] - h[:, kk])
    return arg[sig]


def total_loss(l_s: float, l_uc: float, l_prr_l: float, l_prr_u: float, lam: float) -> LossBreakdown:
    for name, v in (("l_s", l_s), ("l_uc", l_uc), ("l_prr_l", l_prr_l),
                    ("l_prr_u", l_prr_u), ("lambda", lam)):
        if v < 0:
            raise NegativeTerm(f"{name} must be >= 0, got {v!r}")
    return LossBreakdown(float(l_s), float(l_uc), float(l_prr_l), float(l_prr_u), float(lam))

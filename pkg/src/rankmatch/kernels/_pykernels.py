"""Pure numpy versions of the hot row kernels.

Every function takes C-contiguous float64 ``(B, c)`` arrays and works row by
row; the Cython module ``_ckernels`` exposes the same names and signatures.
"""

import numpy as np


def kl_rows(target, pred, floor):
    """Per-row KL(target || pred) with ``0 ln 0 = 0`` and ``pred`` floored."""
    target = np.asarray(target, dtype=np.float64)
    pred = np.maximum(np.asarray(pred, dtype=np.float64), floor)
    pos = target > 0
    safe_t = np.where(pos, target, 1.0)
    terms = np.where(pos, target * np.log(safe_t / pred), 0.0)
    return terms.sum(axis=1)


def prr_rows(pred, source, t, use_margin):
    """Pairwise relevance ranking hinge per row.

    For every pair j < k whose ``source`` gap exceeds ``t`` the row gets
    ``max(0, margin - (pred_hi - pred_lo))`` where ``hi`` is the label ranked
    higher by ``source`` and ``margin`` is the source gap (or 0 when
    ``use_margin`` is false). Returns ``(loss, grad)`` with ``grad`` the
    subgradient of each row's loss with respect to ``pred`` (0 at the kink).
    """
    pred = np.asarray(pred, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    B, c = pred.shape
    loss = np.zeros(B)
    grad = np.zeros((B, c))
    if c < 2:
        return loss, grad
    jj, kk = np.triu_indices(c, k=1)
    diff = source[:, jj] - source[:, kk]
    j_over_k = diff > t
    k_over_j = -diff > t
    sig = j_over_k | k_over_j
    # orient every pair as (hi, lo) by the source ranking
    sign = np.where(j_over_k, 1.0, -1.0)
    gap = np.abs(diff) if use_margin else np.zeros_like(diff)
    arg = gap - sign * (pred[:, jj] - pred[:, kk])
    active = sig & (arg > 0)
    loss = np.where(active, arg, 0.0).sum(axis=1)
    # d arg / d pred_j = -sign, d arg / d pred_k = +sign
    w = np.where(active, sign, 0.0)
    rows = np.broadcast_to(np.arange(B)[:, None], w.shape)
    np.add.at(grad, (rows, np.broadcast_to(jj, w.shape)), -w)
    np.add.at(grad, (rows, np.broadcast_to(kk, w.shape)), w)
    return loss, grad


def metric_rows(truth, pred):
    """Six LDL metrics per row, columns ordered
    chebyshev, clark, canberra, kl, intersection, cosine.

    Cosine is NaN for rows where either side is the zero vector.
    """
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    B = truth.shape[0]
    out = np.empty((B, 6))
    absdiff = np.abs(truth - pred)
    s = truth + pred
    nz = s != 0
    safe_s = np.where(nz, s, 1.0)
    out[:, 0] = absdiff.max(axis=1) if truth.shape[1] else 0.0
    ratio = np.where(nz, absdiff / safe_s, 0.0)
    out[:, 1] = np.sqrt((ratio * ratio).sum(axis=1))
    out[:, 2] = ratio.sum(axis=1)
    out[:, 3] = kl_rows(truth, pred, 1e-12)
    out[:, 4] = np.minimum(truth, pred).sum(axis=1)
    norms = np.sqrt((truth * truth).sum(axis=1)) * np.sqrt((pred * pred).sum(axis=1))
    dots = (truth * pred).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out[:, 5] = np.where(norms > 0, dots / np.where(norms > 0, norms, 1.0), np.nan)
    return out

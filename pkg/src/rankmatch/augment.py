"""Seeded feature-space augmentations.

Weak augmentation is small additive Gaussian jitter. Strong augmentation is
larger jitter followed by random coordinate dropout, a Cutout analog.

Generators are keyed by ``(seed, stream, epoch, sample_index)`` through
:func:`keyed_rng`, so a sample's noise does not depend on batch order or on
how many draws other streams consumed.
"""

from __future__ import annotations

import numpy as np

STREAM_LABELED_WEAK = 0
STREAM_PLD = 1
STREAM_STRONG = 2
STREAM_SHUFFLE = 3


def keyed_rng(seed: int, stream: int, epoch: int = 0, sample_index: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed % 2**64, stream, epoch, sample_index]))
    )


def weak_augment(x, sigma: float, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    noise = rng.standard_normal(x.shape)
    if sigma == 0:
        return x.copy()
    return x + sigma * noise


def strong_augment(x, sigma: float, dropout: float, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if not 0 <= dropout < 1:
        raise ValueError("dropout must lie in [0, 1)")
    noise = rng.standard_normal(x.shape)
    keep = rng.random(x.shape) >= dropout
    out = x + sigma * noise if sigma > 0 else x.copy()
    return np.where(keep, out, 0.0)

"""Domain types shared across rankmatch: distributions, datasets, configs, reports."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SIMPLEX_ATOL = 1e-9


class RankMatchError(ValueError):
    """Base class for all rankmatch errors."""


class NegativeEntry(RankMatchError):
    pass


class SumNotOne(RankMatchError):
    pass


class TooFewLabels(RankMatchError):
    pass


class DimensionMismatch(RankMatchError):
    pass


class LengthMismatch(RankMatchError):
    pass


class EmptyInput(RankMatchError):
    pass


class ZeroVector(RankMatchError):
    pass


class NonFiniteLogit(RankMatchError):
    pass


class NonFiniteFeature(RankMatchError):
    pass


class NegativeTerm(RankMatchError):
    pass


class ShapeMismatch(RankMatchError):
    pass


class StepOutOfRange(RankMatchError):
    pass


class ConfigInvalid(RankMatchError):
    pass


class EmptyLabeledPool(RankMatchError):
    pass


class EmptyLabeledBatch(RankMatchError):
    pass


class _LineError(RankMatchError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseError(_LineError):
    pass


class InvalidDistribution(_LineError):
    pass


class InconsistentWidth(_LineError):
    pass


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabelDistribution:
    """A point on the probability simplex over ``c`` labels.

    Build through :func:`validate_distribution`; the constructor itself does
    not check the simplex constraints so that internal code can wrap arrays it
    already knows are valid.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"LabelDistribution({self.values.tolist()})"

    @property
    def num_labels(self) -> int:
        return len(self.values)


def validate_distribution(values: Sequence[float]) -> LabelDistribution:
    """Check ``values`` lie on the simplex and wrap them. Never renormalizes."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("distribution must be non-empty")
    if arr.size < 2:
        raise TooFewLabels(f"need at least 2 labels, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise SumNotOne("distribution contains non-finite entries")
    if np.any(arr < 0):
        j = int(np.argmax(arr < 0))
        raise NegativeEntry(f"entry {j} is negative ({arr[j]!r})")
    total = math.fsum(arr.tolist())
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise SumNotOne(f"entries sum to {total!r}")
    return LabelDistribution(arr)


def _check_features(values) -> np.ndarray:
    arr = _frozen_array(np.asarray(values, dtype=np.float64).ravel())
    if arr.size < 1:
        raise EmptyInput("feature vector must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteFeature("feature vector has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_features(self.values))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class LabeledExample:
    features: FeatureVector
    target: LabelDistribution

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledExample):
            return NotImplemented
        return self.features == other.features and self.target == other.target


@dataclass(frozen=True, eq=False)
class UnlabeledExample:
    features: FeatureVector

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnlabeledExample):
            return NotImplemented
        return self.features == other.features


def labeled_example(features, target) -> LabeledExample:
    return LabeledExample(FeatureVector(features), validate_distribution(target))


def unlabeled_example(features) -> UnlabeledExample:
    return UnlabeledExample(FeatureVector(features))


@dataclass(frozen=True)
class Dataset:
    """Labeled pool plus (possibly empty) unlabeled pool with fixed dimensions.

    ``feature_dim`` and ``num_labels`` may be omitted when they can be read
    off the examples.
    """

    labeled: tuple[LabeledExample, ...]
    unlabeled: tuple[UnlabeledExample, ...] = ()
    num_labels: int | None = None
    feature_dim: int | None = None

    def __post_init__(self):
        labeled = tuple(self.labeled)
        unlabeled = tuple(self.unlabeled)
        object.__setattr__(self, "labeled", labeled)
        object.__setattr__(self, "unlabeled", unlabeled)

        dim = self.feature_dim
        if dim is None:
            pool = labeled or unlabeled
            if not pool:
                raise EmptyInput("cannot infer feature_dim from an empty dataset")
            dim = pool[0].features.dim
        c = self.num_labels
        if c is None:
            if not labeled:
                raise EmptyInput("cannot infer num_labels without labeled examples")
            c = labeled[0].target.num_labels
        if c < 2:
            raise TooFewLabels(f"num_labels must be >= 2, got {c}")

        for i, ex in enumerate(labeled):
            if ex.features.dim != dim:
                raise DimensionMismatch(
                    f"labeled example {i} has {ex.features.dim} features, expected {dim}"
                )
            if ex.target.num_labels != c:
                raise DimensionMismatch(
                    f"labeled example {i} has {ex.target.num_labels} labels, expected {c}"
                )
        for i, ex in enumerate(unlabeled):
            if ex.features.dim != dim:
                raise DimensionMismatch(
                    f"unlabeled example {i} has {ex.features.dim} features, expected {dim}"
                )
        object.__setattr__(self, "feature_dim", int(dim))
        object.__setattr__(self, "num_labels", int(c))

    @classmethod
    def from_arrays(cls, features, targets, unlabeled_features=None) -> "Dataset":
        features = np.asarray(features, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if features.ndim != 2 or targets.ndim != 2:
            raise DimensionMismatch("features and targets must be 2-D")
        if len(features) != len(targets):
            raise LengthMismatch("features and targets differ in length")
        labeled = [labeled_example(x, d) for x, d in zip(features, targets)]
        unlabeled = []
        if unlabeled_features is not None:
            unlabeled_features = np.asarray(unlabeled_features, dtype=np.float64)
            unlabeled = [unlabeled_example(x) for x in unlabeled_features]
        return cls(
            tuple(labeled),
            tuple(unlabeled),
            num_labels=targets.shape[1] if targets.size else None,
            feature_dim=features.shape[1],
        )

    @property
    def n(self) -> int:
        return len(self.labeled)

    @property
    def m(self) -> int:
        return len(self.unlabeled)

    @cached_property
    def features(self) -> np.ndarray:
        """Labeled features stacked into an ``(n, feature_dim)`` array."""
        return _stack([ex.features.values for ex in self.labeled], self.feature_dim)

    @cached_property
    def targets(self) -> np.ndarray:
        return _stack([ex.target.values for ex in self.labeled], self.num_labels)

    @cached_property
    def unlabeled_features(self) -> np.ndarray:
        return _stack([ex.features.values for ex in self.unlabeled], self.feature_dim)


def _stack(rows: Iterable[np.ndarray], width: int) -> np.ndarray:
    rows = list(rows)
    if not rows:
        out = np.zeros((0, width))
    else:
        out = np.vstack(rows)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``lam`` is the PRR weight (serialized as ``lambda``). The ``use_*`` masks
    switch individual loss terms off for ablations; ``pld_source`` picks
    whether pseudo-label distributions come from the live or the EMA model.
    """

    lam: float = 0.01
    threshold_t: float = 0.2
    k_weak: int = 2
    epochs: int = 30
    batch_size: int = 32
    max_lr: float = 1e-4
    ema_decay: float = 0.98
    weak_sigma: float = 0.05
    strong_sigma: float = 0.2
    strong_dropout: float = 0.25
    seed: int = 1
    weight_decay: float = 0.01
    hidden: int | None = None
    pld_source: str = "live"
    use_prr_labeled: bool = True
    use_consistency: bool = True
    use_prr_unlabeled: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        problems = []
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            problems.append("lambda must be >= 0")
        if not (0 <= self.threshold_t < 1):
            problems.append("threshold_t must lie in [0, 1)")
        if self.k_weak < 1:
            problems.append("k_weak must be >= 1")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if not (self.max_lr > 0 and math.isfinite(self.max_lr)):
            problems.append("max_lr must be > 0")
        if not (0 <= self.ema_decay < 1):
            problems.append("ema_decay must lie in [0, 1)")
        if self.weak_sigma < 0:
            problems.append("weak_sigma must be >= 0")
        if self.strong_sigma < self.weak_sigma:
            problems.append("strong_sigma must be >= weak_sigma")
        if not (0 <= self.strong_dropout < 1):
            problems.append("strong_dropout must lie in [0, 1)")
        if self.weight_decay < 0:
            problems.append("weight_decay must be >= 0")
        if not (-(2**63) <= self.seed < 2**64):
            problems.append("seed must fit in 64 bits")
        if self.hidden is not None and self.hidden < 1:
            problems.append("hidden must be >= 1 when given")
        if self.pld_source not in ("live", "ema"):
            problems.append("pld_source must be 'live' or 'ema'")
        if problems:
            raise ConfigInvalid("; ".join(problems))

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        return cls(**data)


@dataclass(frozen=True)
class LossBreakdown:
    supervised: float
    consistency: float
    prr_labeled: float
    prr_unlabeled: float
    lam: float
    total: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.total):
            object.__setattr__(self, "total", self.recompute_total())

    def recompute_total(self) -> float:
        return self.supervised + self.consistency + self.lam * (
            self.prr_labeled + self.prr_unlabeled
        )

    def to_dict(self) -> dict:
        return {
            "supervised": self.supervised,
            "consistency": self.consistency,
            "prr_labeled": self.prr_labeled,
            "prr_unlabeled": self.prr_unlabeled,
            "lambda": self.lam,
            "total": self.total,
        }


METRIC_NAMES = ("chebyshev", "clark", "canberra", "kl", "intersection", "cosine")


@dataclass(frozen=True)
class MetricsReport:
    chebyshev: float
    clark: float
    canberra: float
    kl: float
    intersection: float
    cosine: float
    sample_count: int

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in METRIC_NAMES}
        out["sample_count"] = self.sample_count
        return out

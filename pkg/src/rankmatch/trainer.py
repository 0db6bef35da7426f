"""RankMatch training loop, EMA, one-cycle schedule and the ablation protocol."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import augment
from .core import (
    Dataset,
    DimensionMismatch,
    EmptyLabeledPool,
    LossBreakdown,
    MetricsReport,
    ShapeMismatch,
    StepOutOfRange,
    TrainConfig,
)
from .metrics import evaluate_all
from .model import (
    ModelParams,
    ObjectiveInputs,
    backward,
    check_same_shapes,
    init_adam_state,
    init_params,
    optimizer_step,
    predict,
)

log = logging.getLogger(__name__)

WARMUP_FRACTION = 0.3
START_DIV = 25.0
END_DIV = 1e4


@dataclass(frozen=True)
class EmaState:
    shadow: ModelParams
    decay: float


def ema_update(state: EmaState, params: ModelParams) -> EmaState:
    try:
        check_same_shapes(state.shadow, params)
    except ShapeMismatch as exc:
        raise ShapeMismatch("EMA shadow and live parameters differ in shape") from exc
    d = state.decay
    return EmaState(state.shadow.map(lambda s, p: d * s + (1 - d) * p, params), d)


def one_cycle_lr(step: int, total_steps: int, max_lr: float) -> float:
    """Linear warmup from max_lr/25 to max_lr over the first 30% of steps,
    then cosine decay to max_lr/1e4 at the final step."""
    if not 0 <= step < total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {total_steps})")
    start, end = max_lr / START_DIV, max_lr / END_DIV
    peak = int(math.floor(WARMUP_FRACTION * total_steps + 0.5))
    if step <= peak:
        return start + (max_lr - start) * step / peak if peak > 0 else start
    span = total_steps - 1 - peak
    frac = (step - peak) / span
    return end + (max_lr - end) * 0.5 * (1.0 + math.cos(math.pi * frac))


@dataclass
class TrainHistory:
    epoch_losses: list[LossBreakdown] = field(default_factory=list)
    test_metrics: list[MetricsReport] = field(default_factory=list)
    lr_trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epoch_losses": [lb.to_dict() for lb in self.epoch_losses],
            "test_metrics": [m.to_dict() for m in self.test_metrics],
            "lr_trace": list(self.lr_trace),
        }


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    ema: EmaState
    history: TrainHistory

    def __iter__(self):
        return iter((self.params, self.ema, self.history))


def evaluate_params(params: ModelParams, data: Dataset) -> MetricsReport:
    if data.num_labels != params.num_labels or data.feature_dim != params.feature_dim:
        raise ShapeMismatch(
            f"model is {params.feature_dim}->{params.num_labels}, "
            f"data is {data.feature_dim}->{data.num_labels}"
        )
    return evaluate_all(data.targets, predict(params, data.features))


def _weak_batch(X: np.ndarray, idx: np.ndarray, seed: int, epoch: int, sigma: float) -> np.ndarray:
    return np.stack([
        augment.weak_augment(X[i], sigma, augment.keyed_rng(seed, augment.STREAM_LABELED_WEAK, epoch, int(i)))
        for i in idx
    ])


def pld_batch(params: ModelParams, X: np.ndarray, idx, passes, config: TrainConfig) -> np.ndarray:
    """PLDs for ``X[idx]``, each averaged over ``k_weak`` weak views.

    Same values as calling :func:`rankmatch.losses.build_pld` per sample with
    the sample's keyed generator, computed with one batched forward pass.
    """
    K = config.k_weak
    views = []
    for i, q in zip(idx, passes):
        rng = augment.keyed_rng(config.seed, augment.STREAM_PLD, int(q), int(i))
        views.extend(augment.weak_augment(X[i], config.weak_sigma, rng) for _ in range(K))
    H = predict(params, np.stack(views)).reshape(len(idx), K, -1)
    acc = H[:, 0].copy()
    for a in range(1, K):
        acc += H[:, a]
    return acc / K


def _strong_batch(X, idx, passes, config: TrainConfig) -> np.ndarray:
    return np.stack([
        augment.strong_augment(
            X[i], config.strong_sigma, config.strong_dropout,
            augment.keyed_rng(config.seed, augment.STREAM_STRONG, int(q), int(i)),
        )
        for i, q in zip(idx, passes)
    ])


class _UnlabeledCursor:
    """Endless reshuffled pass over ``m`` indices; yields (index, pass) pairs."""

    def __init__(self, m: int, seed: int):
        self.m, self.seed = m, seed
        self.pass_no, self.pos = -1, 0
        self.order = np.zeros(0, dtype=np.int64)

    def take(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        idx, passes = [], []
        while len(idx) < count:
            if self.pos >= len(self.order):
                self.pass_no += 1
                rng = augment.keyed_rng(self.seed, augment.STREAM_SHUFFLE, self.pass_no, 1)
                self.order = rng.permutation(self.m)
                self.pos = 0
            idx.append(self.order[self.pos])
            passes.append(self.pass_no)
            self.pos += 1
        return np.array(idx, dtype=np.int64), np.array(passes, dtype=np.int64)


def train(dataset: Dataset, test: Dataset | None = None, config: TrainConfig | None = None) -> TrainResult:
    """Train from scratch; fully determined by (dataset, config)."""
    config = config or TrainConfig()
    config.validate()
    if dataset.n == 0:
        raise EmptyLabeledPool("training needs at least one labeled example")
    if test is not None and (test.num_labels != dataset.num_labels or test.feature_dim != dataset.feature_dim):
        raise DimensionMismatch("test set dimensions differ from the training set")

    X, D = dataset.features, dataset.targets
    XU = dataset.unlabeled_features
    n, m, B = dataset.n, dataset.m, config.batch_size
    needs_unlabeled = m > 0 and (config.use_consistency or (config.use_prr_unlabeled and config.lam > 0))

    params = init_params(dataset.feature_dim, dataset.num_labels, config.hidden, seed=config.seed)
    ema = EmaState(params.copy(), config.ema_decay)
    adam = init_adam_state(params)
    steps_per_epoch = math.ceil(n / B)
    total_steps = steps_per_epoch * config.epochs
    cursor = _UnlabeledCursor(m, config.seed)
    history = TrainHistory()
    step = 0

    for epoch in range(config.epochs):
        order = augment.keyed_rng(config.seed, augment.STREAM_SHUFFLE, epoch, 0).permutation(n)
        sums = np.zeros(4)
        for b in range(steps_per_epoch):
            idx = order[b * B:(b + 1) * B]
            x_weak = _weak_batch(X, idx, config.seed, epoch, config.weak_sigma)
            if needs_unlabeled:
                uidx, passes = cursor.take(B)
                teacher = ema.shadow if config.pld_source == "ema" else params
                plds = pld_batch(teacher, XU, uidx, passes, config)
                x_strong = _strong_batch(XU, uidx, passes, config)
            else:
                plds = x_strong = None
            inputs = ObjectiveInputs.build(x_weak, D[idx], x_strong, plds)
            loss, grads = backward(params, inputs, config)
            lr = one_cycle_lr(step, total_steps, config.max_lr)
            params, adam = optimizer_step(params, grads, adam, step + 1, lr, config.weight_decay)
            ema = ema_update(ema, params)
            history.lr_trace.append(lr)
            sums += (loss.supervised, loss.consistency, loss.prr_labeled, loss.prr_unlabeled)
            step += 1
        means = sums / steps_per_epoch
        history.epoch_losses.append(LossBreakdown(*means.tolist(), lam=config.lam))
        if test is not None and test.n > 0:
            history.test_metrics.append(evaluate_params(ema.shadow, test))
        log.debug("epoch %d loss %.6g", epoch, history.epoch_losses[-1].total)
    return TrainResult(params, ema, history)


ABLATION_STAGES = (
    ("pretrain", dict(use_prr_labeled=False, use_consistency=False, use_prr_unlabeled=False)),
    ("+prr", dict(use_prr_labeled=True, use_consistency=False, use_prr_unlabeled=False)),
    ("+consistency", dict(use_prr_labeled=True, use_consistency=True, use_prr_unlabeled=True)),
)


@dataclass(frozen=True)
class AblationRun:
    tag: str
    config: TrainConfig
    result: TrainResult
    final_metrics: MetricsReport | None


def ablate(dataset: Dataset, test: Dataset | None, config: TrainConfig) -> list[AblationRun]:
    """Supervised-only, then + labeled PRR, then the full objective, same seed."""
    runs = []
    for tag, mask in ABLATION_STAGES:
        cfg = config.replace(**mask)
        result = train(dataset, test, cfg)
        final = evaluate_params(result.ema.shadow, test) if test is not None and test.n else None
        runs.append(AblationRun(tag, cfg, result, final))
    return runs

"""Linear-softmax predictor (optionally one ReLU hidden layer) with
hand-derived gradients of the full RankMatch objective."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import kernels
from .core import (
    DimensionMismatch,
    EmptyLabeledBatch,
    LabelDistribution,
    LossBreakdown,
    ParseError,
    ShapeMismatch,
    TrainConfig,
)
from .losses import PRED_FLOOR, hinge_arguments, softmax_rows

_ORDER = ("hidden_weights", "hidden_bias", "weights", "bias")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Output layer ``weights`` (c x d_in) and ``bias`` (c); with a hidden
    layer, ``hidden_weights`` (h x dim) and ``hidden_bias`` (h) feed it."""

    weights: np.ndarray
    bias: np.ndarray
    hidden_weights: np.ndarray | None = None
    hidden_bias: np.ndarray | None = None

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _ORDER if getattr(self, name) is not None}

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "ModelParams":
        unknown = set(tensors) - set(_ORDER)
        if unknown:
            raise ShapeMismatch(f"unknown tensors {sorted(unknown)}")
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()})

    def map(self, fn: Callable[..., np.ndarray], *others: "ModelParams") -> "ModelParams":
        """Apply ``fn`` tensor-wise across ``self`` and ``others``."""
        for o in others:
            check_same_shapes(self, o)
        return ModelParams.from_tensors(
            {k: fn(v, *(o.tensors()[k] for o in others)) for k, v in self.tensors().items()}
        )

    def copy(self) -> "ModelParams":
        return self.map(np.array)

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.tensors().values()])

    def with_flat(self, flat: np.ndarray) -> "ModelParams":
        out, pos = {}, 0
        for k, v in self.tensors().items():
            out[k] = np.asarray(flat[pos:pos + v.size], dtype=np.float64).reshape(v.shape).copy()
            pos += v.size
        return ModelParams.from_tensors(out)

    def equals(self, other: "ModelParams") -> bool:
        a, b = self.tensors(), other.tensors()
        return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)

    @property
    def num_labels(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        src = self.hidden_weights if self.hidden_weights is not None else self.weights
        return src.shape[1]

    @property
    def size(self) -> int:
        return sum(v.size for v in self.tensors().values())


GradientSet = ModelParams


def check_same_shapes(a: ModelParams, b: ModelParams) -> None:
    ta, tb = a.tensors(), b.tensors()
    if ta.keys() != tb.keys() or any(ta[k].shape != tb[k].shape for k in ta):
        raise ShapeMismatch("parameter sets have different shapes")


def init_params(feature_dim: int, num_labels: int, hidden: int | None = None, seed: int = 1) -> ModelParams:
    """Glorot-uniform weights and zero biases, deterministic per seed."""
    if feature_dim < 1 or num_labels < 1 or (hidden is not None and hidden < 1):
        raise ValueError("dimensions must be >= 1")
    rng = np.random.default_rng(seed)

    def glorot(fan_out, fan_in):
        s = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(fan_out, fan_in))

    if hidden is None:
        return ModelParams(glorot(num_labels, feature_dim), np.zeros(num_labels))
    hw = glorot(hidden, feature_dim)
    return ModelParams(glorot(num_labels, hidden), np.zeros(num_labels), hw, np.zeros(hidden))


def _check_inputs(params: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.feature_dim:
        raise DimensionMismatch(f"inputs have {X.shape[1]} features, model expects {params.feature_dim}")
    return X


def logits(params: ModelParams, X) -> np.ndarray:
    X = _check_inputs(params, X)
    if params.hidden_weights is not None:
        X = np.maximum(X @ params.hidden_weights.T + params.hidden_bias, 0.0)
    return X @ params.weights.T + params.bias


def predict(params: ModelParams, X) -> np.ndarray:
    """Batch forward pass: ``(B, dim)`` features to ``(B, c)`` distributions."""
    return softmax_rows(logits(params, X))


def forward(params: ModelParams, x) -> LabelDistribution:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("forward takes a single feature vector")
    return LabelDistribution(predict(params, x)[0])


@dataclass(frozen=True)
class ObjectiveInputs:
    """Already-augmented inputs of one training step.

    ``plds`` are fixed targets for ``x_strong``; nothing differentiates them.
    """

    x_weak: np.ndarray
    targets: np.ndarray
    x_strong: np.ndarray
    plds: np.ndarray

    @classmethod
    def build(cls, x_weak, targets, x_strong=None, plds=None) -> "ObjectiveInputs":
        x_weak = np.atleast_2d(np.asarray(x_weak, dtype=np.float64))
        targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
        c = targets.shape[1]
        if x_strong is None or len(x_strong) == 0:
            x_strong = np.zeros((0, x_weak.shape[1]))
            plds = np.zeros((0, c))
        x_strong = np.atleast_2d(np.asarray(x_strong, dtype=np.float64))
        plds = np.atleast_2d(np.asarray(plds, dtype=np.float64))
        if len(x_weak) != len(targets) or len(x_strong) != len(plds):
            raise DimensionMismatch("inputs and targets differ in length")
        if plds.shape[1] != c:
            raise DimensionMismatch("plds and targets differ in label count")
        return cls(x_weak, targets, x_strong, plds)


def _terms_active(config: TrainConfig) -> tuple[bool, bool, bool]:
    prr_on = config.lam > 0
    return (
        config.use_consistency,
        prr_on and config.use_prr_labeled,
        prr_on and config.use_prr_unlabeled,
    )


def _hidden_forward(params: ModelParams, X: np.ndarray):
    pre = X @ params.hidden_weights.T + params.hidden_bias
    return pre, np.maximum(pre, 0.0)


def backward(
    params: ModelParams, inputs: ObjectiveInputs, config: TrainConfig
) -> tuple[LossBreakdown, GradientSet]:
    """Loss breakdown and its analytic gradient with respect to ``params``.

    KL terms give ``(h - target) / batch`` at the logits; PRR hinges give
    subgradients of -1/+1 on active pairs, pushed back through the softmax
    Jacobian.
    """
    loss, grads, _ = _evaluate(params, inputs, config, need_grad=True)
    return loss, grads


def objective(params: ModelParams, inputs: ObjectiveInputs, config: TrainConfig) -> LossBreakdown:
    return _evaluate(params, inputs, config, need_grad=False)[0]


def kink_arguments(params: ModelParams, inputs: ObjectiveInputs, config: TrainConfig) -> np.ndarray:
    """Every hinge (and ReLU) argument of the objective at ``params``."""
    return _evaluate(params, inputs, config, need_grad=False, need_kinks=True)[2]


def _evaluate(params, inputs, config, need_grad, need_kinks=False):
    n, m = len(inputs.x_weak), len(inputs.x_strong)
    if n == 0:
        raise EmptyLabeledBatch("the labeled batch is empty")
    if inputs.targets.shape[1] != params.num_labels:
        raise DimensionMismatch(
            f"targets have {inputs.targets.shape[1]} labels, model predicts {params.num_labels}"
        )
    use_uc, use_prr_l, use_prr_u = _terms_active(config)
    use_unlabeled = m > 0 and (use_uc or use_prr_u)

    X = _check_inputs(params, inputs.x_weak)
    if use_unlabeled:
        X = np.vstack([X, _check_inputs(params, inputs.x_strong)])
    hidden = params.hidden_weights is not None
    if hidden:
        pre, A = _hidden_forward(params, X)
    else:
        A = X
    H = softmax_rows(A @ params.weights.T + params.bias)
    Hw, Hs = H[:n], H[n:]
    t = config.threshold_t
    kinks = []

    d = inputs.targets
    l_s = float(kernels.kl_rows(d, Hw, PRED_FLOOR).mean())
    # gradient with respect to the probabilities (dH) and the logits (dZ)
    dZ = np.zeros_like(H)
    dZ[:n] = (Hw - d) / n
    dH = np.zeros_like(H)

    l_prr_l = 0.0
    if use_prr_l:
        rows, g = kernels.prr_rows(Hw, d, t, True)
        l_prr_l = float(rows.mean())
        dH[:n] += config.lam * g / n
        if need_kinks:
            kinks.append(hinge_arguments(Hw, d, t, True))

    l_uc = l_prr_u = 0.0
    if use_unlabeled:
        p = inputs.plds
        if use_uc:
            l_uc = float(kernels.kl_rows(p, Hs, PRED_FLOOR).mean())
            dZ[n:] = (Hs - p) / m
        if use_prr_u:
            rows, g = kernels.prr_rows(Hs, p, t, False)
            l_prr_u = float(rows.mean())
            dH[n:] += config.lam * g / m
            if need_kinks:
                kinks.append(hinge_arguments(Hs, p, t, False))

    loss = LossBreakdown(l_s, l_uc, l_prr_l, l_prr_u, config.lam)
    if need_kinks and hidden:
        kinks.append(pre.ravel())
    kink_arr = np.concatenate(kinks) if kinks else np.zeros(0)
    if not need_grad:
        return loss, None, kink_arr

    # softmax Jacobian-vector product: dz = h * (dh - <h, dh>)
    dZ += H * (dH - (H * dH).sum(axis=1, keepdims=True))
    grads = {"weights": dZ.T @ A, "bias": dZ.sum(axis=0)}
    if hidden:
        dPre = (dZ @ params.weights) * (pre > 0)
        grads["hidden_weights"] = dPre.T @ X
        grads["hidden_bias"] = dPre.sum(axis=0)
    return loss, ModelParams.from_tensors(grads), kink_arr


def finite_diff_grad(
    loss_fn: Callable[[ModelParams], float], params: ModelParams, epsilon: float = 1e-5
) -> GradientSet:
    """Central-difference gradient of ``loss_fn`` at ``params``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    flat = params.flat()
    out = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + epsilon
        up = loss_fn(params.with_flat(flat))
        flat[i] = orig - epsilon
        down = loss_fn(params.with_flat(flat))
        flat[i] = orig
        out[i] = (up - down) / (2 * epsilon)
    return params.with_flat(out)


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: int
    analytic: np.ndarray
    numeric: np.ndarray

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance


def gradient_check(
    params: ModelParams,
    inputs: ObjectiveInputs,
    config: TrainConfig,
    epsilon: float = 1e-5,
    kink_tol: float = 1e-6,
    grads: GradientSet | None = None,
) -> GradCheckResult:
    """Compare ``backward`` with central differences of the total loss.

    A coordinate is skipped when some hinge or ReLU argument is within
    ``kink_tol`` of zero at ``params`` or at either probe point, or changes
    sign between the probes. The error is the largest absolute difference
    over checked coordinates divided by the largest gradient magnitude.
    """
    if grads is None:
        grads = backward(params, inputs, config)[1]
    analytic = grads.flat()
    flat = params.flat()
    numeric = np.zeros_like(flat)
    keep = np.ones(flat.size, dtype=bool)
    base_k = kink_arguments(params, inputs, config)
    if base_k.size and np.abs(base_k).min() < kink_tol:
        keep[:] = False
    for i in range(flat.size):
        orig = flat[i]
        vals, ks = [], []
        for sgn in (1.0, -1.0):
            flat[i] = orig + sgn * epsilon
            p = params.with_flat(flat)
            loss, _, k = _evaluate(p, inputs, config, need_grad=False, need_kinks=True)
            vals.append(loss.total)
            ks.append(k)
        flat[i] = orig
        numeric[i] = (vals[0] - vals[1]) / (2 * epsilon)
        if ks[0].size and (
            np.abs(ks[0]).min() < kink_tol
            or np.abs(ks[1]).min() < kink_tol
            or np.any(np.signbit(ks[0]) != np.signbit(ks[1]))
            or np.any(np.signbit(ks[0]) != np.signbit(base_k))
        ):
            keep[i] = False
    a, nmr = analytic[keep], numeric[keep]
    if a.size == 0:
        err = 0.0
    else:
        scale = max(np.abs(a).max(), np.abs(nmr).max())
        err = float(np.abs(a - nmr).max() / scale) if scale > 0 else 0.0
    return GradCheckResult(err, int(keep.sum()), int((~keep).sum()), analytic, numeric)


@dataclass(frozen=True)
class AdamState:
    m: ModelParams
    v: ModelParams


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def init_adam_state(params: ModelParams) -> AdamState:
    zeros = params.map(np.zeros_like)
    return AdamState(zeros, zeros.copy())


def optimizer_step(
    params: ModelParams,
    grads: GradientSet,
    state: AdamState,
    step: int,
    lr: float,
    weight_decay: float,
) -> tuple[ModelParams, AdamState]:
    """One AdamW update with decoupled weight decay; ``step`` counts from 1."""
    if step < 1:
        raise ValueError("step must be >= 1")
    check_same_shapes(params, grads)
    m = state.m.map(lambda m_, g: ADAM_BETA1 * m_ + (1 - ADAM_BETA1) * g, grads)
    v = state.v.map(lambda v_, g: ADAM_BETA2 * v_ + (1 - ADAM_BETA2) * g * g, grads)
    bc1 = 1 - ADAM_BETA1**step
    bc2 = 1 - ADAM_BETA2**step

    def update(theta, m_, v_):
        m_hat = m_ / bc1
        v_hat = v_ / bc2
        return theta - lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * theta)

    return params.map(update, m, v), AdamState(m, v)


CHECKPOINT_MAGIC = "rankmatch-checkpoint 1"


def _fmt(v: float) -> str:
    return repr(float(v))


def save_checkpoint(path, sections: dict[str, ModelParams]) -> None:
    """Write named parameter sets as a text listing with shape headers.

    Values use Python's shortest round-trip float repr, so reloading is
    bit-exact.
    """
    lines = [CHECKPOINT_MAGIC]
    for name, params in sections.items():
        lines.append(f"section {name}")
        for key, arr in params.tensors().items():
            lines.append(f"tensor {key} {' '.join(str(s) for s in arr.shape)}")
            rows = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
            lines.extend(" ".join(_fmt(x) for x in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_checkpoint(path) -> dict[str, ModelParams]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ParseError(1, "not a rankmatch checkpoint")
    it: Iterator[tuple[int, str]] = iter(enumerate(lines[1:], start=2))
    sections: dict[str, dict[str, np.ndarray]] = {}
    current = None
    for lineno, line in it:
        head = line.split()
        if not head:
            continue
        if head[0] == "section" and len(head) == 2:
            current = sections.setdefault(head[1], {})
        elif head[0] == "tensor" and len(head) >= 3 and current is not None:
            try:
                shape = tuple(int(s) for s in head[2:])
            except ValueError as exc:
                raise ParseError(lineno, f"bad shape {head[2:]}") from exc
            nrows = shape[0] if len(shape) > 1 else 1
            values = []
            for _ in range(nrows):
                try:
                    row_no, row = next(it)
                except StopIteration as exc:
                    raise ParseError(lineno, "truncated tensor") from exc
                try:
                    values.extend(float(tok) for tok in row.split())
                except ValueError as exc:
                    raise ParseError(row_no, "non-numeric value") from exc
            if len(values) != int(np.prod(shape)):
                raise ParseError(lineno, f"tensor {head[1]} expects {int(np.prod(shape))} values")
            current[head[1]] = np.array(values, dtype=np.float64).reshape(shape)
        else:
            raise ParseError(lineno, f"unexpected line {line!r}")
    return {name: ModelParams.from_tensors(t) for name, t in sections.items()}

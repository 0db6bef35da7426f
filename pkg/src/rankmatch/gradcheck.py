"""Seeded random gradient checks of the full objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TrainConfig
from .model import ModelParams, ObjectiveInputs, backward, gradient_check, init_params

LAMBDAS = (0.0, 0.01, 0.1)
THRESHOLDS = (0.1, 0.2)


@dataclass(frozen=True)
class Trial:
    index: int
    num_labels: int
    dim: int
    n: int
    m: int
    hidden: int | None
    lam: float
    t: float
    max_rel_error: float
    checked: int
    skipped: int
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def random_instance(seed: int, trial: int):
    """Parameters, inputs and config for one trial, drawn from (seed, trial)."""
    rng = np.random.default_rng([seed, trial])
    c = int(rng.integers(2, 9))
    dim = int(rng.integers(3, 17))
    n = int(rng.integers(1, 9))
    m = int(rng.integers(0, 9))
    hidden = int(rng.integers(2, 9)) if trial % 3 == 2 else None
    lam = float(rng.choice(LAMBDAS))
    t = float(rng.choice(THRESHOLDS))
    params = init_params(dim, c, hidden, seed=int(rng.integers(2**31)))
    # spread the predictions so that PRR pairs are active in both directions
    spread = 2.0 if hidden is None else 1.0
    params = params.map(lambda a: a * spread + rng.normal(0.0, 0.1, size=a.shape))
    inputs = ObjectiveInputs.build(
        rng.normal(size=(n, dim)),
        rng.dirichlet(np.ones(c), size=n),
        rng.normal(size=(m, dim)),
        rng.dirichlet(np.ones(c), size=m),
    )
    config = TrainConfig(lam=lam, threshold_t=t, hidden=hidden)
    return params, inputs, config


def run_gradcheck(seed: int = 1, trials: int = 50, tolerance: float = 1e-4,
                  corrupt: float = 0.0) -> list[Trial]:
    """``corrupt`` adds that much to one analytic gradient entry (test hook)."""
    out = []
    for i in range(trials):
        params, inputs, config = random_instance(seed, i)
        grads = backward(params, inputs, config)[1]
        if corrupt:
            w = grads.weights.copy()
            w.flat[0] += corrupt
            grads = ModelParams.from_tensors({**grads.tensors(), "weights": w})
        res = gradient_check(params, inputs, config, grads=grads)
        out.append(Trial(
            i, params.num_labels, params.feature_dim, len(inputs.x_weak), len(inputs.x_strong),
            config.hidden, config.lam, config.threshold_t, res.max_rel_error,
            res.checked, res.skipped, res.max_rel_error <= tolerance,
        ))
    return out

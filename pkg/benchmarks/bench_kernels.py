"""Time the compiled and numpy kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--batch 32] [--labels 6]

Each kernel runs on the same random inputs under both backends; a full
training step (forward, backward, AdamW) is timed in a subprocess per
backend since the backend is chosen at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rankmatch import kernels

STEP_SNIPPET = """
import timeit
from rankmatch import dataio, kernels
from rankmatch.core import TrainConfig
from rankmatch.model import ObjectiveInputs, backward, init_adam_state, init_params, optimizer_step
from rankmatch.trainer import pld_batch
import numpy as np
train, _, _ = dataio.synth_generate({batch}, {batch}, 0, 16, {labels}, seed=1)
cfg = TrainConfig(lam=0.1)
params = init_params(16, {labels}, seed=1)
idx = np.arange({batch}); passes = np.zeros({batch}, dtype=int)
plds = pld_batch(params, train.unlabeled_features, idx, passes, cfg)
inputs = ObjectiveInputs.build(train.features, train.targets, train.unlabeled_features, plds)
state = init_adam_state(params)
def step():
    loss, grads = backward(params, inputs, cfg)
    optimizer_step(params, grads, state, 1, 1e-3, 0.01)
print(kernels.BACKEND, min(timeit.repeat(step, number=50, repeat={repeat})) / 50)
"""


def bench_kernel(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=50, repeat=repeat)) / 50


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--labels", type=int, default=6)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    d = rng.dirichlet(np.ones(args.labels), size=args.batch)
    p = rng.dirichlet(np.ones(args.labels), size=args.batch)
    cases = {
        "kl_rows": (d, p, 1e-12),
        "prr_rows": (p, d, 0.1, True),
        "metric_rows": (d, p),
    }
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; timing the numpy backend only")
    print(f"batch={args.batch} labels={args.labels}; microseconds per call (best of {args.repeat})")
    print(f"{'kernel':14s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, call_args in cases.items():
        times = [bench_kernel(getattr(kernels.get_backend(b), name), call_args, args.repeat) for b in backends]
        row = f"{name:14s}" + "".join(f"{t * 1e6:12.2f}" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)

    snippet = STEP_SNIPPET.format(batch=args.batch, labels=args.labels, repeat=max(3, args.repeat // 4))
    step_times = []
    for b in backends:
        env = dict(os.environ, RANKMATCH_PURE_PYTHON="1" if b == "python" else "0")
        out = subprocess.run([sys.executable, "-c", snippet], env=env, capture_output=True, text=True, check=True)
        _, secs = out.stdout.split()
        step_times.append(float(secs))
    row = f"{'train step':14s}" + "".join(f"{t * 1e6:12.2f}" for t in step_times)
    if len(step_times) > 1:
        row += f"{step_times[1] / step_times[0]:11.1f}x"
    print(row)


if __name__ == "__main__":
    main()

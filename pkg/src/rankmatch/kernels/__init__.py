"""Row kernels with a compiled core and a numpy fallback.

The Cython extension is used when it was built and importable; setting
``RANKMATCH_PURE_PYTHON=1`` forces the numpy path. ``BACKEND`` names the one
in use. :func:`get_backend` returns either implementation explicitly, for
equivalence tests and benchmarks.
"""

import os
from types import SimpleNamespace

import numpy as np

from . import _pykernels

_API = ("kl_rows", "prr_rows", "metric_rows")

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def available_backends():
    return ("cython", "python") if _ckernels is not None else ("python",)


def get_backend(name):
    if name == "python":
        mod = _pykernels
    elif name == "cython":
        if _ckernels is None:
            raise ImportError("the compiled rankmatch kernels are not built")
        mod = _ckernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return SimpleNamespace(name=name, **{fn: getattr(mod, fn) for fn in _API})


if os.environ.get("RANKMATCH_PURE_PYTHON", "") not in ("", "0") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = get_backend(BACKEND)


def _rows(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def kl_rows(target, pred, floor=1e-12):
    return np.asarray(_impl.kl_rows(_rows(target), _rows(pred), float(floor)))


def prr_rows(pred, source, t, use_margin):
    loss, grad = _impl.prr_rows(_rows(pred), _rows(source), float(t), bool(use_margin))
    return np.asarray(loss), np.asarray(grad)


def metric_rows(truth, pred):
    return np.asarray(_impl.metric_rows(_rows(truth), _rows(pred)))

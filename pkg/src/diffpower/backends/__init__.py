"""Backend selection for the numeric hot paths.

The ``DIFFPOWER_BACKEND`` environment variable (read at import) picks the
kernel implementation:

* ``numba`` - @njit kernels; import error if numba is missing
* ``numpy`` - pure-numpy fallback
* ``auto``  - numba when importable, numpy otherwise (default)

``benchmarks/bench_backends.py`` times the two side by side.
"""
from __future__ import annotations

import os

import numpy as np

ENV_VAR = "DIFFPOWER_BACKEND"

ACT_IDENTITY = 0
ACT_SILU = 1


def _load():
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{ENV_VAR} must be 'auto', 'numba' or 'numpy', got {choice!r}"
        )
    if choice in ("auto", "numba"):
        try:
            from . import numba_impl
            return numba_impl
        except ImportError:
            if choice == "numba":
                raise
    from . import numpy_impl
    return numpy_impl


_impl = _load()
BACKEND_NAME = _impl.NAME


def _matrix(x) -> np.ndarray:
    """Float64 C-contiguous writable 2-D view/copy of x."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if not a.flags.writeable:
        a = a.copy()
    return a


def _dims(layer_dims) -> np.ndarray:
    return np.ascontiguousarray(layer_dims, dtype=np.int64)


def forward_batch(x, params, layer_dims, act_code=ACT_SILU):
    return _impl.forward_batch(_matrix(x), params, _dims(layer_dims), act_code)


def backward_batch(x, upstream, params, layer_dims, act_code=ACT_SILU):
    return _impl.backward_batch(
        _matrix(x), _matrix(upstream), params, _dims(layer_dims), act_code
    )


def adam_update(params, grads, m, v, step, lr, beta1, beta2, eps):
    # mutates params, m and v in place
    _impl.adam_update(params, np.ascontiguousarray(grads, dtype=np.float64),
                      m, v, step, lr, beta1, beta2, eps)


def waterfill_batch(gains, noise, budget, tol, max_iter=200):
    return _impl.waterfill_batch(_matrix(gains), float(noise), float(budget),
                                 float(tol), int(max_iter))


def sum_rate_batch(gains, powers, noise):
    return _impl.sum_rate_batch(_matrix(gains), _matrix(powers), float(noise))

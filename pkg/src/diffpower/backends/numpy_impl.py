"""Pure-numpy implementations of the numeric hot paths.

Selected when ``DIFFPOWER_BACKEND=numpy`` or when numba is unavailable.
Must stay semantically equivalent to ``numba_impl``; tests/test_backends.py
holds the two to within float tolerance on random inputs.

Dense-net parameters are packed in one flat float64 vector, layer by layer:
row-major weight matrix (dims[l] x dims[l+1]) followed by the bias vector.
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"

ACT_IDENTITY = 0
ACT_SILU = 1


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # branch on sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(x, params, dims, act_code):
    """Dense forward pass; x is (batch, dims[0]), returns (batch, dims[-1])."""
    n_layers = dims.shape[0] - 1
    a = x
    off = 0
    for l in range(n_layers):
        din = int(dims[l])
        dout = int(dims[l + 1])
        w = params[off:off + din * dout].reshape(din, dout)
        off += din * dout
        b = params[off:off + dout]
        off += dout
        a = a @ w + b
        if l < n_layers - 1 and act_code == ACT_SILU:
            a = a * _sigmoid(a)
    return a


def backward_batch(x, upstream, params, dims, act_code):
    """Reverse-mode gradients of forward_batch.

    Returns (flat parameter gradients, input gradients). ``upstream`` is the
    loss gradient with respect to the network output, shape (batch, dims[-1]).
    """
    n_layers = dims.shape[0] - 1
    offs = np.empty(n_layers, dtype=np.int64)
    acts = [x]
    hidden_dact = []
    a = x
    off = 0
    for l in range(n_layers):
        din = int(dims[l])
        dout = int(dims[l + 1])
        offs[l] = off
        w = params[off:off + din * dout].reshape(din, dout)
        b = params[off + din * dout:off + din * dout + dout]
        off += din * dout + dout
        z = a @ w + b
        if l < n_layers - 1:
            if act_code == ACT_SILU:
                s = _sigmoid(z)
                a = z * s
                hidden_dact.append(s * (1.0 + z * (1.0 - s)))
            else:
                a = z
                hidden_dact.append(np.ones_like(z))
        else:
            a = z
        acts.append(a)

    grads = np.zeros_like(params)
    delta = upstream
    for l in range(n_layers - 1, -1, -1):
        din = int(dims[l])
        dout = int(dims[l + 1])
        o = int(offs[l])
        w = params[o:o + din * dout].reshape(din, dout)
        grads[o:o + din * dout] = (acts[l].T @ delta).ravel()
        grads[o + din * dout:o + din * dout + dout] = delta.sum(axis=0)
        delta = delta @ w.T
        if l > 0:
            delta = delta * hidden_dact[l - 1]
    return grads, delta


def adam_update(params, grads, m, v, step, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place. ``step`` is 1-based."""
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    params -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def waterfill_batch(gains, noise, budget, tol, max_iter):
    """Water-filling by bisection on the water level, one row per state.

    Bisects mu over [min(noise/g), min(noise/g) + budget] until the spent
    power matches the budget within tol*budget, then rescales so the budget
    holds to float precision. Returns (powers, water_levels).
    """
    floors = noise / gains
    lo = floors.min(axis=1)
    hi = lo + budget
    resid_tol = tol * budget
    mu = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mu = 0.5 * (lo + hi)
        spent = np.maximum(mu[:, None] - floors, 0.0).sum(axis=1)
        live = np.abs(spent - budget) > resid_tol
        if not live.any():
            break
        over = spent > budget
        hi = np.where(live & over, mu, hi)
        lo = np.where(live & ~over, mu, lo)
    powers = np.maximum(mu[:, None] - floors, 0.0)
    powers *= (budget / powers.sum(axis=1))[:, None]
    active = powers > 0.0
    levels = np.where(active, floors + powers, 0.0).sum(axis=1) / active.sum(axis=1)
    return powers, levels


def sum_rate_batch(gains, powers, noise):
    """Shannon sum rate per row, bits per channel use."""
    return np.log2(1.0 + gains * powers / noise).sum(axis=1)

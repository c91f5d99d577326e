"""Numba-compiled twins of the numpy kernels (default backend).

Same flat-parameter layout and call signatures as ``numpy_impl``. Matrix
products go through np.dot (BLAS); elementwise work is fused into explicit
loops. No fastmath, no parallel sections: results must be reproducible
run to run.
"""
from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

ACT_IDENTITY = 0
ACT_SILU = 1


@njit(cache=True)
def _sigmoid_scalar(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    ez = np.exp(z)
    return ez / (1.0 + ez)


@njit(cache=True)
def forward_batch(x, params, dims, act_code):
    n_layers = dims.shape[0] - 1
    a = np.ascontiguousarray(x)
    off = 0
    for l in range(n_layers):
        din = dims[l]
        dout = dims[l + 1]
        w = np.ascontiguousarray(params[off:off + din * dout]).reshape(din, dout)
        off += din * dout
        b = params[off:off + dout]
        off += dout
        z = np.dot(a, w)
        for i in range(z.shape[0]):
            for j in range(dout):
                z[i, j] += b[j]
        if l < n_layers - 1 and act_code == ACT_SILU:
            for i in range(z.shape[0]):
                for j in range(dout):
                    v = z[i, j]
                    z[i, j] = v * _sigmoid_scalar(v)
        a = z
    return a


@njit(cache=True)
def backward_batch(x, upstream, params, dims, act_code):
    n_layers = dims.shape[0] - 1
    batch = x.shape[0]
    maxw = 0
    for i in range(dims.shape[0]):
        if dims[i] > maxw:
            maxw = dims[i]

    # acts_buf[l, :, :dims[l]] holds layer-l activations; dact_buf the
    # hidden activation derivatives needed on the way back.
    acts_buf = np.zeros((n_layers + 1, batch, maxw))
    dact_buf = np.zeros((n_layers, batch, maxw))
    for i in range(batch):
        for j in range(dims[0]):
            acts_buf[0, i, j] = x[i, j]

    offs = np.zeros(n_layers, dtype=np.int64)
    off = 0
    for l in range(n_layers):
        din = dims[l]
        dout = dims[l + 1]
        offs[l] = off
        w = np.ascontiguousarray(params[off:off + din * dout]).reshape(din, dout)
        off += din * dout
        b = params[off:off + dout]
        off += dout
        a_prev = np.ascontiguousarray(acts_buf[l, :, :din])
        z = np.dot(a_prev, w)
        last = l == n_layers - 1
        for i in range(batch):
            for j in range(dout):
                v = z[i, j] + b[j]
                if last:
                    acts_buf[l + 1, i, j] = v
                elif act_code == ACT_SILU:
                    s = _sigmoid_scalar(v)
                    acts_buf[l + 1, i, j] = v * s
                    dact_buf[l, i, j] = s * (1.0 + v * (1.0 - s))
                else:
                    acts_buf[l + 1, i, j] = v
                    dact_buf[l, i, j] = 1.0

    grads = np.zeros_like(params)
    delta = np.ascontiguousarray(upstream).copy()
    for l in range(n_layers - 1, -1, -1):
        din = dims[l]
        dout = dims[l + 1]
        o = offs[l]
        w = np.ascontiguousarray(params[o:o + din * dout]).reshape(din, dout)
        a_prev_t = np.ascontiguousarray(acts_buf[l, :, :din].T)
        gw = np.dot(a_prev_t, delta)
        k = o
        for i in range(din):
            for j in range(dout):
                grads[k] = gw[i, j]
                k += 1
        for j in range(dout):
            s = 0.0
            for i in range(batch):
                s += delta[i, j]
            grads[o + din * dout + j] = s
        w_t = np.ascontiguousarray(w.T)
        new_delta = np.dot(delta, w_t)
        if l > 0:
            for i in range(batch):
                for j in range(din):
                    new_delta[i, j] *= dact_buf[l - 1, i, j]
        delta = new_delta
    return grads, delta


@njit(cache=True)
def adam_update(params, grads, m, v, step, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for i in range(params.shape[0]):
        g = grads[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        params[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def waterfill_batch(gains, noise, budget, tol, max_iter):
    n, m = gains.shape
    powers = np.zeros((n, m))
    levels = np.zeros(n)
    resid_tol = tol * budget
    for r in range(n):
        lo = noise / gains[r, 0]
        for j in range(1, m):
            f = noise / gains[r, j]
            if f < lo:
                lo = f
        hi = lo + budget
        mu = 0.5 * (lo + hi)
        for _ in range(max_iter):
            mu = 0.5 * (lo + hi)
            spent = 0.0
            for j in range(m):
                d = mu - noise / gains[r, j]
                if d > 0.0:
                    spent += d
            if abs(spent - budget) <= resid_tol:
                break
            if spent > budget:
                hi = mu
            else:
                lo = mu
        total = 0.0
        for j in range(m):
            d = mu - noise / gains[r, j]
            if d > 0.0:
                powers[r, j] = d
                total += d
        scale = budget / total
        lev = 0.0
        cnt = 0
        for j in range(m):
            powers[r, j] *= scale
            if powers[r, j] > 0.0:
                lev += noise / gains[r, j] + powers[r, j]
                cnt += 1
        levels[r] = lev / cnt
    return powers, levels


@njit(cache=True)
def sum_rate_batch(gains, powers, noise):
    n, m = gains.shape
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(m):
            s += np.log2(1.0 + gains[i, j] * powers[i, j] / noise)
        out[i] = s
    return out

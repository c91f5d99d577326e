"""Minimal dense-network substrate shared by the denoiser and the policy.

Parameters live in one flat float64 vector (layer-major: weight matrix then
bias, see backends). Backprop is hand-derived and checked against central
finite differences; Adam is the standard bias-corrected update. No autograd,
no GPU: the models here are a few hundred KB and train in seconds on a CPU.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backends
from .backends import ACT_IDENTITY, ACT_SILU

ACTIVATION_CODES = {"identity": ACT_IDENTITY, "silu": ACT_SILU}


def param_count(layer_dims) -> int:
    dims = list(layer_dims)
    return sum(dims[l] * dims[l + 1] + dims[l + 1] for l in range(len(dims) - 1))


@dataclass
class DenseNet:
    """Fully connected net; hidden layers share one smooth activation, the
    output layer is linear."""

    layer_dims: tuple
    params: np.ndarray
    hidden_activation: str = "silu"

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ValueError("layer_dims needs >= 2 positive entries")
        if self.hidden_activation not in ACTIVATION_CODES:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (param_count(self.layer_dims),):
            raise ValueError("params length does not match layer_dims")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters must be finite")

    @classmethod
    def create(cls, layer_dims, rng: np.random.Generator,
               hidden_activation: str = "silu") -> "DenseNet":
        """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
        dims = tuple(int(d) for d in layer_dims)
        params = np.zeros(param_count(dims))
        off = 0
        for l in range(len(dims) - 1):
            din, dout = dims[l], dims[l + 1]
            bound = np.sqrt(6.0 / (din + dout))
            params[off:off + din * dout] = rng.uniform(-bound, bound, din * dout)
            off += din * dout + dout  # biases stay zero
        return cls(layer_dims=dims, params=params, hidden_activation=hidden_activation)

    @property
    def act_code(self) -> int:
        return ACTIVATION_CODES[self.hidden_activation]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def weights(self) -> list[np.ndarray]:
        """Per-layer weight matrices as writable views into the flat vector."""
        out, off = [], 0
        for l in range(len(self.layer_dims) - 1):
            din, dout = self.layer_dims[l], self.layer_dims[l + 1]
            out.append(self.params[off:off + din * dout].reshape(din, dout))
            off += din * dout + dout
        return out

    @property
    def biases(self) -> list[np.ndarray]:
        out, off = [], 0
        for l in range(len(self.layer_dims) - 1):
            din, dout = self.layer_dims[l], self.layer_dims[l + 1]
            out.append(self.params[off + din * dout:off + din * dout + dout])
            off += din * dout + dout
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(layer_dims=self.layer_dims, params=self.params.copy(),
                        hidden_activation=self.hidden_activation)


def _as_batch(x: np.ndarray, want_dim: int):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != want_dim:
        raise ValueError(f"input of shape {x.shape} does not match dim {want_dim}")
    return batch, single


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the net on a vector or an (n, input_dim) batch."""
    batch, single = _as_batch(x, net.input_dim)
    y = backends.forward_batch(batch, net.params, net.layer_dims, net.act_code)
    return y[0] if single else y


def backward(net: DenseNet, x: np.ndarray, upstream: np.ndarray):
    """Exact reverse-mode gradients of forward.

    upstream is dLoss/dOutput, matching the output shape. Returns
    (flat parameter gradient, input gradient with the shape of x).
    """
    batch, single = _as_batch(x, net.input_dim)
    up, up_single = _as_batch(upstream, net.output_dim)
    if single != up_single or batch.shape[0] != up.shape[0]:
        raise ValueError("input and upstream batch shapes disagree")
    grads, dx = backends.backward_batch(batch, up, net.params, net.layer_dims,
                                        net.act_code)
    return grads, (dx[0] if single else dx)


@dataclass
class AdamState:
    """Moments and step counter for one flat parameter vector."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in (0, 1)")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be > 0")
        if self.first_moment.shape != self.second_moment.shape:
            raise ValueError("moment shapes disagree")

    @classmethod
    def for_params(cls, params: np.ndarray, learning_rate: float = 3e-4,
                   **kwargs) -> "AdamState":
        return cls(first_moment=np.zeros_like(params),
                   second_moment=np.zeros_like(params),
                   learning_rate=learning_rate, **kwargs)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray):
    """One bias-corrected Adam update; mutates params and state in place."""
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ValueError("params/grads/state shapes disagree")
    state.step_count += 1
    backends.adam_update(params, grads, state.first_moment, state.second_moment,
                         state.step_count, state.learning_rate, state.beta1,
                         state.beta2, state.epsilon)
    return params, state


def grad_check(net: DenseNet, loss_fn: Callable, x: np.ndarray,
               tolerance: float, rng: np.random.Generator | None = None,
               num_components: int = 40, step: float = 1e-5) -> bool:
    """Compare backprop against central finite differences.

    loss_fn maps the net output to (scalar loss, gradient w.r.t. output).
    Checks every parameter when the net is small, otherwise a random sample
    of num_components parameters. True iff the max relative error is below
    tolerance; components far below the gradient's own RMS scale are judged
    against that scale, where central differences are pure rounding noise.
    """
    _, gy = loss_fn(forward(net, x))
    analytic, _ = backward(net, x, gy)
    floor = max(1e-8, 1e-3 * float(np.sqrt(np.mean(analytic * analytic))))

    n = net.params.size
    if n <= num_components:
        idx = np.arange(n)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        idx = rng.choice(n, size=num_components, replace=False)

    worst = 0.0
    for i in idx:
        orig = net.params[i]
        net.params[i] = orig + step
        hi, _ = loss_fn(forward(net, x))
        net.params[i] = orig - step
        lo, _ = loss_fn(forward(net, x))
        net.params[i] = orig
        fd = (hi - lo) / (2.0 * step)
        denom = max(abs(fd), abs(analytic[i]), floor)
        worst = max(worst, abs(fd - analytic[i]) / denom)
    return worst < tolerance

"""Policy-gradient baseline: a Gaussian policy over squashed allocations.

The allocation task has no temporal state, so the baseline is a contextual
bandit: draw gains, emit an action, observe the sum rate. Training is
REINFORCE with a batch-mean reward baseline and an entropy bonus; the full
actor-critic machinery of off-the-shelf continuous-control agents adds
nothing here and is intentionally left out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .channel import (ChannelConfig, ChannelState, GainDistribution,
                      PowerAllocation, sample_gains_batch)
from .backends import sum_rate_batch
from .gdm import project_feasible_batch

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
DEFAULT_POLICY_HIDDEN = (128, 128)
DEFAULT_INIT_LOG_STD = -1.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class PolicyModel:
    """Gains -> (mean, log-std) per channel; actions are tanh-squashed and
    projected onto the power simplex."""

    net: nn.DenseNet
    num_channels: int
    log_std_min: float = LOG_STD_MIN
    log_std_max: float = LOG_STD_MAX
    cond_center: float = 0.0
    cond_scale: float = 1.0

    def __post_init__(self):
        if self.net.output_dim != 2 * self.num_channels:
            raise ValueError("policy net must emit 2 outputs per channel")
        if self.net.input_dim != self.num_channels:
            raise ValueError("policy net input must match num_channels")


def make_policy(num_channels: int, rng: np.random.Generator,
                hidden=DEFAULT_POLICY_HIDDEN,
                init_log_std: float = DEFAULT_INIT_LOG_STD) -> PolicyModel:
    dims = (num_channels, *hidden, 2 * num_channels)
    net = nn.DenseNet.create(dims, rng, hidden_activation="silu")
    net.biases[-1][num_channels:] = init_log_std
    return PolicyModel(net=net, num_channels=num_channels)


def _policy_forward(policy: PolicyModel, gains: np.ndarray):
    """Returns (mean, clamped log-std, clamp pass-through mask)."""
    x = (gains - policy.cond_center) / policy.cond_scale
    out = nn.forward(policy.net, x)
    m = policy.num_channels
    mean, log_std_raw = out[:, :m], out[:, m:]
    log_std = np.clip(log_std_raw, policy.log_std_min, policy.log_std_max)
    inside = (log_std_raw > policy.log_std_min) & (log_std_raw < policy.log_std_max)
    return mean, log_std, inside


def act_batch(policy: PolicyModel, gains: np.ndarray, cfg: ChannelConfig,
              rng: np.random.Generator | None, deterministic: bool = False):
    """Sample (or take the mean of) squashed actions and project them.

    Returns (powers (n, M), squashed actions, pre-squash samples u,
    mean, log_std, clamp mask).
    """
    gains = np.atleast_2d(gains)
    mean, log_std, inside = _policy_forward(policy, gains)
    if deterministic:
        u = mean.copy()
    else:
        u = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    squashed = np.tanh(u)
    powers = project_feasible_batch(squashed, cfg)
    return powers, squashed, u, mean, log_std, inside


def policy_act(policy: PolicyModel, state: ChannelState, cfg: ChannelConfig,
               rng: np.random.Generator | None = None,
               deterministic: bool = False) -> PowerAllocation:
    """One feasible allocation for one state."""
    if not deterministic and rng is None:
        raise ValueError("stochastic action needs an rng")
    powers, *_ = act_batch(policy, state.gains[None, :], cfg, rng, deterministic)
    return PowerAllocation(powers=powers[0])


def action_log_probs(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Log densities of the squashed actions tanh(u), per row."""
    z = (u - mean) * np.exp(-log_std)
    gauss = (-0.5 * z * z - log_std - _HALF_LOG_2PI).sum(axis=1)
    squash_corr = np.log1p(-np.tanh(u) ** 2 + 1e-12).sum(axis=1)
    return gauss - squash_corr


@dataclass(frozen=True)
class RolloutBatch:
    """One batch of single-step episodes."""

    conditions: np.ndarray
    raw_actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray

    def __post_init__(self):
        n = self.conditions.shape[0]
        if not (self.raw_actions.shape[0] == self.rewards.shape[0]
                == self.log_probs.shape[0] == n):
            raise ValueError("rollout fields must have matching lengths")
        if np.any(self.rewards < 0.0):
            raise ValueError("sum-rate rewards cannot be negative")


@dataclass
class DrlConfig:
    """REINFORCE hyperparameters, calibrated so the baseline visibly learns
    yet stays below the diffusion model."""

    iterations: int = 600
    batch_size: int = 256
    learning_rate: float = 1e-4
    entropy_weight: float = 1e-3

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")


def policy_gradient_step(policy: PolicyModel, dist: GainDistribution,
                         cfg: ChannelConfig, hp: DrlConfig,
                         rng: np.random.Generator,
                         adam: nn.AdamState) -> tuple[float, RolloutBatch]:
    """One rollout batch plus one Adam update; returns the mean reward."""
    gains = sample_gains_batch(dist, hp.batch_size, rng)
    powers, squashed, u, mean, log_std, inside = act_batch(
        policy, gains, cfg, rng, deterministic=False)
    rewards = sum_rate_batch(gains, powers, cfg.noise_power)
    adv = rewards - rewards.mean()

    # d(-adv * logN(u; mean, std))/dmean and /dlog_std, averaged over the
    # batch; the tanh correction does not depend on the parameters.
    inv_var = np.exp(-2.0 * log_std)
    n = hp.batch_size
    d_mean = -adv[:, None] * (u - mean) * inv_var / n
    z2 = (u - mean) ** 2 * inv_var
    d_log_std = -(adv[:, None] * (z2 - 1.0) + hp.entropy_weight) / n
    d_log_std *= inside  # clamped outputs get no gradient

    upstream = np.concatenate([d_mean, d_log_std], axis=1)
    x = (gains - policy.cond_center) / policy.cond_scale
    grads, _ = nn.backward(policy.net, x, upstream)
    nn.adam_step(adam, policy.net.params, grads)

    batch = RolloutBatch(conditions=gains, raw_actions=squashed, rewards=rewards,
                         log_probs=action_log_probs(u, mean, log_std))
    return float(rewards.mean()), batch


def drl_train(policy: PolicyModel, dist: GainDistribution, cfg: ChannelConfig,
              hp: DrlConfig, rng: np.random.Generator,
              adam: nn.AdamState | None = None) -> tuple[PolicyModel, list[float]]:
    """Train the policy on single-step episodes; returns the reward curve."""
    if policy.cond_center == 0.0 and policy.cond_scale == 1.0:
        mid = 0.5 * (dist.lo + dist.hi)
        policy.cond_center = float(mid.mean())
        policy.cond_scale = float(max((dist.hi - dist.lo).max() / 2.0, 1e-12))
    if adam is None:
        adam = nn.AdamState.for_params(policy.net.params,
                                       learning_rate=hp.learning_rate)
    curve = []
    for _ in range(hp.iterations):
        mean_reward, _ = policy_gradient_step(policy, dist, cfg, hp, rng, adam)
        curve.append(mean_reward)
    return policy, curve

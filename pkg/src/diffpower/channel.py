"""Wireless link model: per-channel gain distributions, the Shannon sum-rate
objective and the uniform allocation baseline.

All quantities are linear scale (not dB). A state is one draw of per-channel
power gains; an allocation is a nonnegative power vector that spends the
whole budget.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import sum_rate_batch

DEFAULT_NOISE_POWER = 1.0
# Calibrated once at build time so that water filling clearly outperforms
# uniform allocation on both gain regimes used by the lifecycle; recorded in
# every run manifest.
DEFAULT_POWER_BUDGET = 0.2

ALLOCATION_SUM_RTOL = 1e-9


@dataclass(frozen=True)
class ChannelConfig:
    """Static link parameters: channel count, per-channel noise power and the
    total transmit power budget."""

    num_channels: int
    noise_power: float = DEFAULT_NOISE_POWER
    power_budget: float = DEFAULT_POWER_BUDGET

    def __post_init__(self):
        if int(self.num_channels) < 1:
            raise ValueError("num_channels must be >= 1")
        if not self.noise_power > 0.0:
            raise ValueError("noise_power must be > 0")
        if not self.power_budget > 0.0:
            raise ValueError("power_budget must be > 0")


@dataclass(frozen=True)
class GainDistribution:
    """Independent per-channel uniform gain ranges, 0 < lo <= hi."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=np.float64))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if lo.size < 1:
            raise ValueError("need at least one channel")
        if not np.all(lo > 0.0):
            raise ValueError("gain range lower bounds must be > 0")
        if not np.all(hi >= lo):
            raise ValueError("gain range upper bounds must satisfy hi >= lo")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_ranges(cls, ranges) -> "GainDistribution":
        """Build from a sequence of (lo, hi) pairs, one per channel."""
        arr = np.asarray(list(ranges), dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("ranges must be a sequence of (lo, hi) pairs")
        return cls(lo=arr[:, 0], hi=arr[:, 1])

    @classmethod
    def from_blocks(cls, blocks) -> "GainDistribution":
        """Build from (count, lo, hi) blocks, e.g. [(10, 5, 8), (10, 3, 6)]."""
        ranges = []
        for count, lo, hi in blocks:
            ranges.extend([(lo, hi)] * int(count))
        return cls.from_ranges(ranges)

    @property
    def num_channels(self) -> int:
        return int(self.lo.size)

    def ranges(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class ChannelState:
    """One realization of the per-channel power gains."""

    gains: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gains, dtype=np.float64))
        if g.ndim != 1 or g.size < 1:
            raise ValueError("gains must be a nonempty vector")
        if not np.all(g > 0.0):
            raise ValueError("all gains must be > 0")
        object.__setattr__(self, "gains", g)

    @property
    def num_channels(self) -> int:
        return int(self.gains.size)


@dataclass(frozen=True)
class PowerAllocation:
    """Nonnegative per-channel transmit powers; constructors in this package
    guarantee the powers spend the configured budget to ALLOCATION_SUM_RTOL."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.powers, dtype=np.float64))
        if p.ndim != 1 or p.size < 1:
            raise ValueError("powers must be a nonempty vector")
        if not np.all(p >= 0.0):
            raise ValueError("powers must be nonnegative")
        object.__setattr__(self, "powers", p)

    def total(self) -> float:
        return float(self.powers.sum())

    def spends_budget(self, cfg: ChannelConfig, rtol: float = ALLOCATION_SUM_RTOL) -> bool:
        return abs(self.total() - cfg.power_budget) <= rtol * cfg.power_budget


def sample_gains(dist: GainDistribution, rng: np.random.Generator) -> ChannelState:
    """Draw one gain vector, each channel uniform on its [lo, hi]."""
    return ChannelState(gains=rng.uniform(dist.lo, dist.hi))


def sample_gains_batch(dist: GainDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. gain vectors as an (n, M) array."""
    return rng.uniform(dist.lo, dist.hi, size=(int(n), dist.num_channels))


def sum_rate(state: ChannelState, alloc: PowerAllocation, cfg: ChannelConfig) -> float:
    """Shannon sum rate sum_m log2(1 + g_m p_m / noise), bits per channel use."""
    if state.num_channels != cfg.num_channels:
        raise ValueError(
            f"state has {state.num_channels} channels, config expects {cfg.num_channels}"
        )
    if alloc.powers.size != cfg.num_channels:
        raise ValueError(
            f"allocation has {alloc.powers.size} channels, config expects {cfg.num_channels}"
        )
    return float(np.log2(1.0 + state.gains * alloc.powers / cfg.noise_power).sum())


def sum_rates(gains: np.ndarray, powers: np.ndarray, cfg: ChannelConfig) -> np.ndarray:
    """Vectorized sum rate for (n, M) gain and power arrays."""
    gains = np.atleast_2d(gains)
    powers = np.atleast_2d(powers)
    if gains.shape != powers.shape or gains.shape[1] != cfg.num_channels:
        raise ValueError("gains and powers must both be (n, num_channels)")
    return sum_rate_batch(gains, powers, cfg.noise_power)


def uniform_allocation(cfg: ChannelConfig) -> PowerAllocation:
    """The average allocation scheme: every channel gets budget / M."""
    per_channel = cfg.power_budget / cfg.num_channels
    return PowerAllocation(powers=np.full(cfg.num_channels, per_channel))

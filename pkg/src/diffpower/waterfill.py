"""Exact water-filling solution of the sum-rate-maximizing power allocation.

For parallel Gaussian channels the optimum is p_m = max(0, mu - noise/g_m)
with the water level mu chosen so the powers spend the budget. The level is
found by bisection on the budget residual (robust, deterministic); a KKT
verifier provides an independent correctness check on any claimed solution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import waterfill_batch
from .channel import ChannelConfig, ChannelState, PowerAllocation

DEFAULT_TOL = 1e-10
MAX_BISECT_ITERS = 200


@dataclass(frozen=True)
class WaterfillSolution:
    """Optimal allocation plus the water level and the active-channel mask."""

    allocation: PowerAllocation
    water_level: float
    active_channels: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.active_channels, dtype=bool)
        if mask.shape != self.allocation.powers.shape:
            raise ValueError("active_channels must match the allocation length")
        object.__setattr__(self, "active_channels", mask)


def waterfill(state: ChannelState, cfg: ChannelConfig, tol: float = DEFAULT_TOL) -> WaterfillSolution:
    """Solve one state. tol is the relative tolerance on the budget residual."""
    if state.num_channels != cfg.num_channels:
        raise ValueError("state/config channel count mismatch")
    if not tol > 0.0:
        raise ValueError("tol must be > 0")
    powers, levels = waterfill_batch(
        state.gains[None, :], cfg.noise_power, cfg.power_budget, tol, MAX_BISECT_ITERS
    )
    p = powers[0]
    return WaterfillSolution(
        allocation=PowerAllocation(powers=p),
        water_level=float(levels[0]),
        active_channels=p > 0.0,
    )


def waterfill_gains(gains: np.ndarray, cfg: ChannelConfig, tol: float = DEFAULT_TOL):
    """Batch solve (n, M) gains; returns (powers (n, M), water_levels (n,))."""
    gains = np.atleast_2d(gains)
    if gains.shape[1] != cfg.num_channels:
        raise ValueError("gains/config channel count mismatch")
    return waterfill_batch(gains, cfg.noise_power, cfg.power_budget, tol, MAX_BISECT_ITERS)


def solution_from_allocation(alloc: PowerAllocation, state: ChannelState,
                             cfg: ChannelConfig) -> WaterfillSolution:
    """Wrap an arbitrary allocation as a candidate solution (for verification).

    The implied water level is the mean of noise/g + p over active channels;
    for a true water-filling solution this is the common level.
    """
    p = alloc.powers
    active = p > 0.0
    floors = cfg.noise_power / state.gains
    level = float((floors[active] + p[active]).mean()) if active.any() else float(floors.min())
    return WaterfillSolution(allocation=alloc, water_level=level, active_channels=active)


def kkt_flags(gains: np.ndarray, powers: np.ndarray, cfg: ChannelConfig,
              tol: float) -> np.ndarray:
    """Vectorized KKT check; returns a boolean per row.

    A row passes iff (i) stationarity: the marginal utilities
    g/(noise + g p) agree across active channels within relative tol,
    (ii) complementary slackness / dual feasibility: inactive channels have
    marginal utility at zero power no better than the active ones, and
    (iii) primal feasibility: p >= 0 and the budget holds within tol.
    """
    gains = np.atleast_2d(gains)
    powers = np.atleast_2d(powers)
    lam = gains / (cfg.noise_power + gains * powers)
    active = powers > 0.0

    feasible = np.all(powers >= 0.0, axis=1)
    feasible &= np.abs(powers.sum(axis=1) - cfg.power_budget) <= tol * cfg.power_budget
    feasible &= active.any(axis=1)

    lam_act_max = np.where(active, lam, -np.inf).max(axis=1)
    lam_act_min = np.where(active, lam, np.inf).min(axis=1)
    stationary = (lam_act_max - lam_act_min) <= tol * lam_act_max

    lam_inact_max = np.where(~active, lam, -np.inf).max(axis=1)
    slack = lam_inact_max <= lam_act_max * (1.0 + tol)

    return feasible & stationary & slack


def verify_kkt(sol: WaterfillSolution, state: ChannelState, cfg: ChannelConfig,
               tol: float) -> bool:
    """True iff the claimed solution satisfies the optimality conditions.

    On top of the stationarity/slackness/feasibility checks this requires the
    recorded water level to match noise/g + p on active channels within tol.
    """
    p = sol.allocation.powers
    if p.size != state.num_channels or state.num_channels != cfg.num_channels:
        raise ValueError("solution/state/config dimensions disagree")
    if not bool(kkt_flags(state.gains[None, :], p[None, :], cfg, tol)[0]):
        return False
    active = p > 0.0
    levels = cfg.noise_power / state.gains[active] + p[active]
    return bool(np.all(np.abs(levels - sol.water_level) <= tol * sol.water_level))

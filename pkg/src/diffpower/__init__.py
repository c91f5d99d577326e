"""Conditional diffusion for transmit power allocation over parallel
Gaussian channels, trained against a water-filling expert, with a
train / shift / retrain lifecycle and a policy-gradient baseline."""

__version__ = "0.1.0"

from .channel import (ChannelConfig, ChannelState, GainDistribution,
                      PowerAllocation, sample_gains, sample_gains_batch,
                      sum_rate, sum_rates, uniform_allocation)
from .waterfill import WaterfillSolution, verify_kkt, waterfill
from .gdm import (Denoiser, DiffusionSchedule, TrainConfig, TrainSample,
                  forward_noise, make_denoiser, make_schedule,
                  project_feasible, sample)
from .drl import DrlConfig, PolicyModel, RolloutBatch, drl_train, make_policy, policy_act
from .lifecycle import (ExpertDataset, ModelSettings, PhaseSchedule,
                        RunMetrics, collect_dataset, run_lifecycle, run_t1,
                        run_t2, run_t3, virtuous_gain)

__all__ = [
    "ChannelConfig", "ChannelState", "GainDistribution", "PowerAllocation",
    "sample_gains", "sample_gains_batch", "sum_rate", "sum_rates",
    "uniform_allocation", "WaterfillSolution", "verify_kkt", "waterfill",
    "Denoiser", "DiffusionSchedule", "TrainConfig", "TrainSample",
    "forward_noise", "make_denoiser", "make_schedule", "project_feasible",
    "sample", "DrlConfig", "PolicyModel", "RolloutBatch", "drl_train",
    "make_policy", "policy_act", "ExpertDataset", "ModelSettings",
    "PhaseSchedule", "RunMetrics", "collect_dataset", "run_lifecycle",
    "run_t1", "run_t2", "run_t3", "virtuous_gain",
]

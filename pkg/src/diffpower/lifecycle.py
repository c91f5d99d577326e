"""Three-phase train / shift / retrain cycle.

T1 trains the diffusion model on expert pairs from the initial gain regime
and measures its improvement over uniform allocation. T2 shifts the gain
distribution, measures how far the frozen model degrades and collects fresh
expert pairs. T3 retrains on the pooled data and reports the virtuous gain:
the retrained model's rate improvement over uniform under the shifted
distribution, with the policy-gradient baseline run through the same cycle
for comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import drl, gdm
from .drl import DEFAULT_INIT_LOG_STD, DEFAULT_POLICY_HIDDEN, DrlConfig
from .channel import (ChannelConfig, GainDistribution, sample_gains_batch,
                      sum_rates, uniform_allocation)
from .seeding import substream
from .waterfill import kkt_flags, waterfill_gains

DATASET_KKT_TOL = 1e-6
DEFAULT_EVAL_SIZE = 2000
RETRAIN_MODES = ("fine_tune", "from_scratch")
# slack for mean-level dominance bookkeeping on identical evaluation sets
DOMINANCE_RTOL = 1e-9

METHOD_EXPERT = "expert"
METHOD_GDM = "gdm"
METHOD_UNIFORM = "uniform"
METHOD_DRL = "drl"


@dataclass(frozen=True)
class PhaseSchedule:
    """What the cycle runs on: the two gain regimes, dataset sizes and how T3
    retrains."""

    t1_dist: GainDistribution
    t2_dist: GainDistribution
    t1_dataset_size: int
    t2_dataset_size: int
    retrain_mode: str = "fine_tune"

    def __post_init__(self):
        if self.t1_dataset_size < 100 or self.t2_dataset_size < 100:
            raise ValueError("dataset sizes must be >= 100")
        if self.retrain_mode not in RETRAIN_MODES:
            raise ValueError(f"retrain_mode must be one of {RETRAIN_MODES}")
        if self.t1_dist.num_channels != self.t2_dist.num_channels:
            raise ValueError("phase distributions must share the channel count")


@dataclass
class ExpertDataset:
    """Paired (gains, water-filling allocation, expert sum rate) samples."""

    gains: np.ndarray
    powers: np.ndarray
    rates: np.ndarray
    source_phase: str = ""

    def __post_init__(self):
        if self.gains.shape != self.powers.shape or self.gains.ndim != 2:
            raise ValueError("gains and powers must be matching (n, M) arrays")
        if self.rates.shape != (self.gains.shape[0],):
            raise ValueError("rates must have one entry per sample")

    def __len__(self) -> int:
        return self.gains.shape[0]

    @property
    def num_channels(self) -> int:
        return self.gains.shape[1]


def collect_dataset(dist: GainDistribution, n: int, cfg: ChannelConfig,
                    rng: np.random.Generator, source_phase: str = "",
                    kkt_tol: float = DATASET_KKT_TOL) -> ExpertDataset:
    """Draw n states and label each with its verified water-filling solution."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gains = sample_gains_batch(dist, n, rng)
    powers, _ = waterfill_gains(gains, cfg)
    ok = kkt_flags(gains, powers, cfg, kkt_tol)
    if not ok.all():
        bad = int((~ok).sum())
        raise RuntimeError(f"{bad}/{n} expert labels failed the KKT check at tol {kkt_tol}")
    rates = sum_rates(gains, powers, cfg)
    return ExpertDataset(gains=gains, powers=powers, rates=rates,
                         source_phase=source_phase)


def virtuous_gain(r_model: float, r_uniform: float) -> float:
    """Fractional rate improvement of a model over uniform allocation."""
    if not r_uniform > 0.0:
        raise ValueError("uniform reference rate must be > 0")
    return (r_model - r_uniform) / r_uniform


@dataclass
class PhaseEvaluation:
    """Per-state sum rates of every method on one fresh evaluation set."""

    phase: str
    gains: np.ndarray
    rates: dict = field(default_factory=dict)

    def mean(self, method: str) -> float:
        return float(self.rates[method].mean())

    def ratio_to_expert(self, method: str) -> float:
        """Ratio of mean sum rates (the primary statistic)."""
        return self.mean(method) / self.mean(METHOD_EXPERT)

    def mean_state_ratio(self, method: str) -> float:
        """Mean of per-state ratios (reported as a secondary statistic)."""
        return float((self.rates[method] / self.rates[METHOD_EXPERT]).mean())

    def improvement_over_uniform(self, method: str) -> float:
        return virtuous_gain(self.mean(method), self.mean(METHOD_UNIFORM))

    def check_expert_dominance(self):
        expert = self.rates[METHOD_EXPERT]
        for method, r in self.rates.items():
            if method == METHOD_EXPERT:
                continue
            slack = DOMINANCE_RTOL * np.maximum(1.0, np.abs(expert))
            if np.any(r > expert + slack):
                raise RuntimeError(
                    f"{method} beat the expert on phase {self.phase}: optimality bug")


def evaluate_phase(phase: str, gains: np.ndarray, cfg: ChannelConfig,
                   denoiser: gdm.Denoiser | None = None,
                   dsched: gdm.DiffusionSchedule | None = None,
                   policy: drl.PolicyModel | None = None,
                   rng: np.random.Generator | None = None) -> PhaseEvaluation:
    """Score expert, uniform and any provided models on the given states."""
    ev = PhaseEvaluation(phase=phase, gains=gains)
    expert_powers, _ = waterfill_gains(gains, cfg)
    ev.rates[METHOD_EXPERT] = sum_rates(gains, expert_powers, cfg)
    uni = np.broadcast_to(uniform_allocation(cfg).powers, gains.shape)
    ev.rates[METHOD_UNIFORM] = sum_rates(gains, uni.copy(), cfg)
    if denoiser is not None:
        raw = gdm.sample_batch(denoiser, gains, dsched, rng)
        powers = gdm.project_feasible_batch(raw, cfg)
        ev.rates[METHOD_GDM] = sum_rates(gains, powers, cfg)
    if policy is not None:
        powers, *_ = drl.act_batch(policy, gains, cfg, None, deterministic=True)
        ev.rates[METHOD_DRL] = sum_rates(gains, powers, cfg)
    ev.check_expert_dominance()
    return ev


@dataclass
class ModelSettings:
    """Everything about the models and the evaluation protocol that is not
    part of the environment itself."""

    diffusion_steps: int = gdm.DEFAULT_NUM_STEPS
    beta_lo: float = gdm.DEFAULT_BETA_LO
    beta_hi: float = gdm.DEFAULT_BETA_HI
    hidden: tuple = gdm.DEFAULT_HIDDEN
    time_embed_dim: int = gdm.DEFAULT_TIME_EMBED_DIM
    train: gdm.TrainConfig = field(default_factory=gdm.TrainConfig)
    retrain_epochs: int = 100
    drl: DrlConfig = field(default_factory=DrlConfig)
    drl_retrain_iterations: int = 600
    drl_hidden: tuple = DEFAULT_POLICY_HIDDEN
    drl_init_log_std: float = DEFAULT_INIT_LOG_STD
    eval_size: int = DEFAULT_EVAL_SIZE

    def diffusion_schedule(self) -> gdm.DiffusionSchedule:
        return gdm.make_schedule(self.diffusion_steps, self.beta_lo, self.beta_hi)

    def retrain_config(self) -> gdm.TrainConfig:
        return gdm.TrainConfig(epochs=self.retrain_epochs,
                               batch_size=self.train.batch_size,
                               learning_rate=self.train.learning_rate,
                               val_fraction=self.train.val_fraction)

    def drl_retrain_config(self) -> DrlConfig:
        return DrlConfig(iterations=self.drl_retrain_iterations,
                         batch_size=self.drl.batch_size,
                         learning_rate=self.drl.learning_rate,
                         entropy_weight=self.drl.entropy_weight)


@dataclass
class T1Result:
    denoiser: gdm.Denoiser
    dsched: gdm.DiffusionSchedule
    policy: drl.PolicyModel
    dataset: ExpertDataset
    evaluation: PhaseEvaluation
    gdm_history: gdm.TrainHistory
    drl_curve: list

    @property
    def ratio_to_expert(self) -> float:
        return self.evaluation.ratio_to_expert(METHOD_GDM)

    @property
    def improvement_over_uniform(self) -> float:
        return self.evaluation.improvement_over_uniform(METHOD_GDM)


@dataclass
class T2Result:
    evaluation: PhaseEvaluation
    dataset: ExpertDataset
    ratio_to_expert: float
    degradation: float


@dataclass
class T3Result:
    denoiser: gdm.Denoiser
    policy: drl.PolicyModel
    evaluation: PhaseEvaluation
    gdm_history: gdm.TrainHistory
    drl_curve: list
    ratio_to_expert: float
    virtuous_gain_gdm: float
    virtuous_gain_drl: float
    virtuous_gain_pre_retrain: float


def run_t1(schedule: PhaseSchedule, cfg: ChannelConfig, settings: ModelSettings,
           master_seed: int) -> T1Result:
    """Collect T1 expert data, train both models, evaluate on fresh states."""
    dsched = settings.diffusion_schedule()
    m = cfg.num_channels

    dataset = collect_dataset(schedule.t1_dist, schedule.t1_dataset_size, cfg,
                              substream(master_seed, "data_t1"), source_phase="t1")

    denoiser = gdm.make_denoiser(m, substream(master_seed, "model_init"),
                                 hidden=settings.hidden,
                                 time_embed_dim=settings.time_embed_dim)
    targets = gdm.normalize_target(dataset.powers, cfg.power_budget)
    denoiser, history = gdm.train(denoiser, dataset.gains, targets, dsched,
                                  settings.train, substream(master_seed, "gdm_train_t1"))

    policy = drl.make_policy(m, substream(master_seed, "policy_init"),
                             hidden=settings.drl_hidden,
                             init_log_std=settings.drl_init_log_std)
    policy, drl_curve = drl.drl_train(policy, schedule.t1_dist, cfg, settings.drl,
                                      substream(master_seed, "drl_t1"))

    rng_eval = substream(master_seed, "eval_t1")
    gains_eval = sample_gains_batch(schedule.t1_dist, settings.eval_size, rng_eval)
    evaluation = evaluate_phase("t1", gains_eval, cfg, denoiser, dsched, policy,
                                rng_eval)
    return T1Result(denoiser=denoiser, dsched=dsched, policy=policy,
                    dataset=dataset, evaluation=evaluation,
                    gdm_history=history, drl_curve=drl_curve)


def run_t2(denoiser: gdm.Denoiser, dsched: gdm.DiffusionSchedule,
           policy: drl.PolicyModel, schedule: PhaseSchedule, cfg: ChannelConfig,
           settings: ModelSettings, master_seed: int,
           ratio_t1: float) -> T2Result:
    """Measure the frozen T1 model under the shifted distribution and collect
    fresh expert pairs there."""
    rng_eval = substream(master_seed, "eval_t2")
    gains_eval = sample_gains_batch(schedule.t2_dist, settings.eval_size, rng_eval)
    evaluation = evaluate_phase("t2_pre", gains_eval, cfg, denoiser, dsched,
                                policy, rng_eval)
    ratio_t2 = evaluation.ratio_to_expert(METHOD_GDM)
    degradation = 1.0 - ratio_t2 / ratio_t1

    dataset = collect_dataset(schedule.t2_dist, schedule.t2_dataset_size, cfg,
                              substream(master_seed, "data_t2"), source_phase="t2")
    return T2Result(evaluation=evaluation, dataset=dataset,
                    ratio_to_expert=ratio_t2, degradation=degradation)


def run_t3(denoiser: gdm.Denoiser, dsched: gdm.DiffusionSchedule,
           policy: drl.PolicyModel, t1_dataset: ExpertDataset,
           t2_dataset: ExpertDataset, schedule: PhaseSchedule,
           cfg: ChannelConfig, settings: ModelSettings,
           master_seed: int) -> T3Result:
    """Retrain on pooled expert data, rerun the baseline on the shifted
    distribution, and compare everything on one fresh T2 evaluation set."""
    if len(t2_dataset) == 0:
        raise ValueError("t2 dataset is empty")
    pre_denoiser = gdm.Denoiser(net=denoiser.net.copy(),
                                condition_dim=denoiser.condition_dim,
                                action_dim=denoiser.action_dim,
                                time_embed_dim=denoiser.time_embed_dim,
                                cond_center=denoiser.cond_center,
                                cond_scale=denoiser.cond_scale)

    pooled_gains = np.concatenate([t1_dataset.gains, t2_dataset.gains])
    pooled_powers = np.concatenate([t1_dataset.powers, t2_dataset.powers])
    targets = gdm.normalize_target(pooled_powers, cfg.power_budget)

    rng_train = substream(master_seed, "gdm_train_t3")
    if schedule.retrain_mode == "fine_tune":
        denoiser, history = gdm.train(denoiser, pooled_gains, targets, dsched,
                                      settings.retrain_config(), rng_train)
    else:
        denoiser = gdm.make_denoiser(cfg.num_channels,
                                     substream(master_seed, "model_init_t3"),
                                     hidden=settings.hidden,
                                     time_embed_dim=settings.time_embed_dim)
        denoiser, history = gdm.train(denoiser, pooled_gains, targets, dsched,
                                      settings.train, rng_train)

    policy, drl_curve = drl.drl_train(policy, schedule.t2_dist, cfg,
                                      settings.drl_retrain_config(),
                                      substream(master_seed, "drl_t3"))

    rng_eval = substream(master_seed, "eval_t3")
    gains_eval = sample_gains_batch(schedule.t2_dist, settings.eval_size, rng_eval)
    evaluation = evaluate_phase("t3", gains_eval, cfg, denoiser, dsched, policy,
                                rng_eval)

    # score the pre-retraining model on the same states for a clean comparison
    raw = gdm.sample_batch(pre_denoiser, gains_eval, dsched, rng_eval)
    pre_rates = sum_rates(gains_eval, gdm.project_feasible_batch(raw, cfg), cfg)
    r_uniform = evaluation.mean(METHOD_UNIFORM)

    return T3Result(
        denoiser=denoiser, policy=policy, evaluation=evaluation,
        gdm_history=history, drl_curve=drl_curve,
        ratio_to_expert=evaluation.ratio_to_expert(METHOD_GDM),
        virtuous_gain_gdm=virtuous_gain(evaluation.mean(METHOD_GDM), r_uniform),
        virtuous_gain_drl=virtuous_gain(evaluation.mean(METHOD_DRL), r_uniform),
        virtuous_gain_pre_retrain=virtuous_gain(float(pre_rates.mean()), r_uniform),
    )


@dataclass
class RunMetrics:
    """Cross-phase summary; the payload behind the emitted metrics table."""

    evaluations: dict
    ratio_t1: float
    ratio_t2_pre: float
    ratio_t3: float
    degradation_t2: float
    improvement_t1: float
    virtuous_gain_gdm: float
    virtuous_gain_drl: float
    virtuous_gain_pre_retrain: float

    def __post_init__(self):
        for ev in self.evaluations.values():
            expert = ev.mean(METHOD_EXPERT)
            for method in ev.rates:
                if ev.mean(method) > expert * (1.0 + DOMINANCE_RTOL):
                    raise RuntimeError("expert mean rate undercut; optimality bug")

    def table_rows(self) -> list[dict]:
        """One row per (phase, method) in a fixed order."""
        rows = []
        for phase in ("t1", "t2_pre", "t3"):
            ev = self.evaluations[phase]
            for method in (METHOD_EXPERT, METHOD_GDM, METHOD_UNIFORM, METHOD_DRL):
                if method not in ev.rates:
                    continue
                vg = ""
                if phase == "t3" and method in (METHOD_GDM, METHOD_DRL):
                    vg = self.virtuous_gain_gdm if method == METHOD_GDM else self.virtuous_gain_drl
                rows.append({
                    "phase": phase,
                    "method": method,
                    "mean_sum_rate": ev.mean(method),
                    "ratio_to_expert": ev.ratio_to_expert(method),
                    "mean_state_ratio": ev.mean_state_ratio(method),
                    "improvement_over_uniform": ev.improvement_over_uniform(method),
                    "virtuous_gain": vg,
                })
        return rows

    def summary_items(self) -> list[tuple[str, float]]:
        return [
            ("ratio_to_expert_t1", self.ratio_t1),
            ("ratio_to_expert_t2_pre", self.ratio_t2_pre),
            ("ratio_to_expert_t3", self.ratio_t3),
            ("degradation_t2", self.degradation_t2),
            ("improvement_over_uniform_t1", self.improvement_t1),
            ("virtuous_gain_gdm", self.virtuous_gain_gdm),
            ("virtuous_gain_drl", self.virtuous_gain_drl),
            ("virtuous_gain_pre_retrain", self.virtuous_gain_pre_retrain),
        ]


@dataclass
class LifecycleResult:
    t1: T1Result
    t2: T2Result
    t3: T3Result
    metrics: RunMetrics


def run_lifecycle(schedule: PhaseSchedule, cfg: ChannelConfig,
                  settings: ModelSettings, master_seed: int) -> LifecycleResult:
    """The full cycle: T1 train, T2 shift and collect, T3 retrain and compare."""
    t1 = run_t1(schedule, cfg, settings, master_seed)
    t2 = run_t2(t1.denoiser, t1.dsched, t1.policy, schedule, cfg, settings,
                master_seed, t1.ratio_to_expert)
    t3 = run_t3(t1.denoiser, t1.dsched, t1.policy, t1.dataset, t2.dataset,
                schedule, cfg, settings, master_seed)
    metrics = RunMetrics(
        evaluations={"t1": t1.evaluation, "t2_pre": t2.evaluation,
                     "t3": t3.evaluation},
        ratio_t1=t1.ratio_to_expert,
        ratio_t2_pre=t2.ratio_to_expert,
        ratio_t3=t3.ratio_to_expert,
        degradation_t2=t2.degradation,
        improvement_t1=t1.improvement_over_uniform,
        virtuous_gain_gdm=t3.virtuous_gain_gdm,
        virtuous_gain_drl=t3.virtuous_gain_drl,
        virtuous_gain_pre_retrain=t3.virtuous_gain_pre_retrain,
    )
    return LifecycleResult(t1=t1, t2=t2, t3=t3, metrics=metrics)

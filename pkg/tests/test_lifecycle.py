import dataclasses

import numpy as np
import pytest

from diffpower import drl, gdm, lifecycle
from diffpower.channel import ChannelConfig, GainDistribution, sample_gains_batch
from diffpower.waterfill import kkt_flags


def small_settings() -> lifecycle.ModelSettings:
    return lifecycle.ModelSettings(
        diffusion_steps=25,
        hidden=(48, 48),
        train=gdm.TrainConfig(epochs=15, batch_size=64, learning_rate=1e-3),
        retrain_epochs=8,
        drl=drl.DrlConfig(iterations=50, batch_size=96),
        drl_retrain_iterations=50,
        drl_hidden=(32, 32),
        eval_size=250,
    )


def small_schedule(m=6) -> lifecycle.PhaseSchedule:
    return lifecycle.PhaseSchedule(
        t1_dist=GainDistribution.from_blocks([(m // 2, 5.0, 8.0),
                                              (m - m // 2, 3.0, 6.0)]),
        t2_dist=GainDistribution.from_blocks([(m, 1.0, 7.0)]),
        t1_dataset_size=400,
        t2_dataset_size=400,
    )


@pytest.fixture(scope="module")
def small_cycle():
    cfg = ChannelConfig(num_channels=6, noise_power=1.0, power_budget=0.2)
    return lifecycle.run_lifecycle(small_schedule(), cfg, small_settings(),
                                   master_seed=42), cfg


# ------------------------------------------------------------------ dataset

def test_collect_dataset_verified_pairs(cfg20, t1_dist):
    ds = lifecycle.collect_dataset(t1_dist, 500, cfg20,
                                   np.random.default_rng(0), source_phase="t1")
    assert len(ds) == 500
    assert ds.source_phase == "t1"
    assert kkt_flags(ds.gains, ds.powers, cfg20, 1e-6).all()
    assert np.allclose(ds.powers.sum(axis=1), cfg20.power_budget, rtol=1e-9)


def test_collect_degenerate_single_point_distribution():
    cfg = ChannelConfig(num_channels=2, noise_power=1.0, power_budget=1.0)
    dist = GainDistribution.from_ranges([(4.0, 4.0), (1.0, 1.0)])
    ds = lifecycle.collect_dataset(dist, 1, cfg, np.random.default_rng(1))
    # same closed form as the two-channel worked example
    assert ds.powers[0] == pytest.approx([0.875, 0.125], abs=1e-9)


def test_expert_beats_uniform_on_shifted_distribution(cfg20, t2_dist):
    ds = lifecycle.collect_dataset(t2_dist, 800, cfg20, np.random.default_rng(2))
    uniform_rate = np.log2(
        1.0 + ds.gains * (cfg20.power_budget / 20) / cfg20.noise_power
    ).sum(axis=1).mean()
    assert ds.rates.mean() > uniform_rate


def test_collect_rejects_bad_n(cfg20, t1_dist):
    with pytest.raises(ValueError):
        lifecycle.collect_dataset(t1_dist, 0, cfg20, np.random.default_rng(3))


# ------------------------------------------------------------ virtuous gain

def test_virtuous_gain_values():
    assert lifecycle.virtuous_gain(2.0, 2.0) == 0.0
    assert lifecycle.virtuous_gain(1.151 * 3.0, 3.0) == pytest.approx(0.151, abs=1e-12)
    assert lifecycle.virtuous_gain(1.5, 2.0) < 0.0
    with pytest.raises(ValueError):
        lifecycle.virtuous_gain(1.0, 0.0)
    with pytest.raises(ValueError):
        lifecycle.virtuous_gain(1.0, -2.0)


# ------------------------------------------------------------------ phases

def test_schedule_validation(t1_dist, t2_dist):
    with pytest.raises(ValueError):
        lifecycle.PhaseSchedule(t1_dist=t1_dist, t2_dist=t2_dist,
                                t1_dataset_size=50, t2_dataset_size=400)
    with pytest.raises(ValueError):
        lifecycle.PhaseSchedule(t1_dist=t1_dist, t2_dist=t2_dist,
                                t1_dataset_size=400, t2_dataset_size=400,
                                retrain_mode="sometimes")
    small = GainDistribution.from_blocks([(3, 1.0, 2.0)])
    with pytest.raises(ValueError):
        lifecycle.PhaseSchedule(t1_dist=t1_dist, t2_dist=small,
                                t1_dataset_size=400, t2_dataset_size=400)


def test_cycle_t1_learns_something(small_cycle):
    res, _ = small_cycle
    losses = res.t1.gdm_history.val_losses
    assert losses[-1] < losses[0]
    assert 0.0 < res.t1.ratio_to_expert <= 1.0


def test_cycle_expert_dominates_per_state(small_cycle):
    res, _ = small_cycle
    for ev in (res.t1.evaluation, res.t2.evaluation, res.t3.evaluation):
        expert = ev.rates[lifecycle.METHOD_EXPERT]
        for method, rates in ev.rates.items():
            assert np.all(rates <= expert + 1e-9)


def test_cycle_metric_rows_complete(small_cycle):
    res, _ = small_cycle
    rows = res.metrics.table_rows()
    combos = {(r["phase"], r["method"]) for r in rows}
    for phase in ("t1", "t2_pre", "t3"):
        for method in ("expert", "gdm", "uniform", "drl"):
            assert (phase, method) in combos
    for row in rows:
        assert row["mean_sum_rate"] > 0.0
        if row["method"] == "expert":
            assert row["ratio_to_expert"] == pytest.approx(1.0, abs=1e-12)


def test_no_shift_control_degradation_near_zero(small_cycle):
    # same distribution on both sides: any measured "degradation" is pure
    # sampling noise, so both ratios get the full-size evaluation protocol
    res, cfg = small_cycle
    settings = small_settings()
    settings.eval_size = 2000
    rng = np.random.default_rng(99)
    gains = sample_gains_batch(small_schedule().t1_dist, 2000, rng)
    ev = lifecycle.evaluate_phase("t1", gains, cfg, res.t1.denoiser,
                                  res.t1.dsched, res.t1.policy, rng)
    ratio_t1 = ev.ratio_to_expert(lifecycle.METHOD_GDM)
    control_schedule = dataclasses.replace(small_schedule(),
                                           t2_dist=small_schedule().t1_dist)
    control = lifecycle.run_t2(res.t1.denoiser, res.t1.dsched, res.t1.policy,
                               control_schedule, cfg, settings,
                               master_seed=42, ratio_t1=ratio_t1)
    assert abs(control.degradation) <= 0.01


def test_run_t1_deterministic(cfg20, t1_dist, t2_dist):
    schedule = lifecycle.PhaseSchedule(t1_dist=t1_dist, t2_dist=t2_dist,
                                       t1_dataset_size=150, t2_dataset_size=150)
    settings = small_settings()
    settings.train = gdm.TrainConfig(epochs=4, batch_size=64, learning_rate=1e-3)
    settings.drl = drl.DrlConfig(iterations=10, batch_size=64)
    settings.eval_size = 100
    a = lifecycle.run_t1(schedule, cfg20, settings, master_seed=7)
    b = lifecycle.run_t1(schedule, cfg20, settings, master_seed=7)
    assert np.array_equal(a.denoiser.net.params, b.denoiser.net.params)
    for method in a.evaluation.rates:
        assert np.array_equal(a.evaluation.rates[method],
                              b.evaluation.rates[method])


def test_run_t3_from_scratch_mode(small_cycle):
    res, cfg = small_cycle
    schedule = dataclasses.replace(small_schedule(), retrain_mode="from_scratch")
    t3 = lifecycle.run_t3(res.t1.denoiser, res.t1.dsched, res.t1.policy,
                          res.t1.dataset, res.t2.dataset, schedule, cfg,
                          small_settings(), master_seed=43)
    assert np.isfinite(t3.virtuous_gain_gdm)
    assert t3.evaluation.mean(lifecycle.METHOD_GDM) > 0.0


def test_evaluation_statistics_consistent(small_cycle):
    res, _ = small_cycle
    ev = res.t1.evaluation
    gdm_mean = ev.rates[lifecycle.METHOD_GDM].mean()
    expert_mean = ev.rates[lifecycle.METHOD_EXPERT].mean()
    assert ev.ratio_to_expert(lifecycle.METHOD_GDM) == pytest.approx(
        gdm_mean / expert_mean, rel=1e-12)
    uni_mean = ev.rates[lifecycle.METHOD_UNIFORM].mean()
    assert ev.improvement_over_uniform(lifecycle.METHOD_GDM) == pytest.approx(
        gdm_mean / uni_mean - 1.0, rel=1e-12)

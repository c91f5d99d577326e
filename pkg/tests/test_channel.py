import numpy as np
import pytest

from diffpower.channel import (ChannelConfig, ChannelState, GainDistribution,
                               PowerAllocation, sample_gains,
                               sample_gains_batch, sum_rate, sum_rates,
                               uniform_allocation)


def test_t1_distribution_samples_stay_in_range(t1_dist):
    rng = np.random.default_rng(0)
    for _ in range(50):
        state = sample_gains(t1_dist, rng)
        assert np.all(state.gains[:10] >= 5.0) and np.all(state.gains[:10] <= 8.0)
        assert np.all(state.gains[10:] >= 3.0) and np.all(state.gains[10:] <= 6.0)


def test_degenerate_range_gives_exact_value():
    dist = GainDistribution.from_blocks([(5, 4.0, 4.0)])
    state = sample_gains(dist, np.random.default_rng(1))
    assert np.all(state.gains == 4.0)


def test_large_sample_mean_matches_uniform_mean():
    # law of large numbers: U[1, 7] has mean 4
    dist = GainDistribution.from_blocks([(1, 1.0, 7.0)])
    draws = sample_gains_batch(dist, 100_000, np.random.default_rng(2))
    assert abs(draws.mean() - 4.0) < 0.04


def test_samples_respect_ranges_property():
    rng = np.random.default_rng(3)
    for _ in range(25):
        m = int(rng.integers(1, 12))
        lo = rng.uniform(0.1, 5.0, m)
        hi = lo + rng.uniform(0.0, 4.0, m)
        dist = GainDistribution(lo=lo, hi=hi)
        batch = sample_gains_batch(dist, 64, rng)
        assert np.all(batch >= lo) and np.all(batch <= hi)


def test_invalid_distributions_rejected():
    with pytest.raises(ValueError):
        GainDistribution(lo=np.array([0.0]), hi=np.array([1.0]))  # lo must be > 0
    with pytest.raises(ValueError):
        GainDistribution(lo=np.array([2.0]), hi=np.array([1.0]))  # hi < lo
    with pytest.raises(ValueError):
        GainDistribution(lo=np.array([1.0, 1.0]), hi=np.array([2.0]))


def test_sum_rate_single_channel_snr_one():
    cfg = ChannelConfig(num_channels=1, noise_power=1.0, power_budget=1.0)
    rate = sum_rate(ChannelState(gains=np.array([1.0])),
                    PowerAllocation(powers=np.array([1.0])), cfg)
    assert rate == pytest.approx(1.0, abs=1e-15)


def test_sum_rate_zero_power_is_zero():
    cfg = ChannelConfig(num_channels=3, noise_power=0.7, power_budget=1.0)
    rate = sum_rate(ChannelState(gains=np.array([5.0, 1.0, 9.0])),
                    PowerAllocation(powers=np.zeros(3)), cfg)
    assert rate == 0.0


def test_sum_rate_powers_of_two():
    cfg = ChannelConfig(num_channels=2, noise_power=1.0, power_budget=2.0)
    rate = sum_rate(ChannelState(gains=np.array([3.0, 1.0])),
                    PowerAllocation(powers=np.array([1.0, 1.0])), cfg)
    assert rate == pytest.approx(3.0, abs=1e-12)  # log2(4) + log2(2)


def test_sum_rate_dimension_mismatch():
    cfg = ChannelConfig(num_channels=2)
    state = ChannelState(gains=np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        sum_rate(state, PowerAllocation(powers=np.array([0.1, 0.1])), cfg)
    with pytest.raises(ValueError):
        sum_rate(ChannelState(gains=np.array([1.0, 2.0])),
                 PowerAllocation(powers=np.array([0.1])), cfg)


def test_sum_rate_permutation_invariant():
    rng = np.random.default_rng(4)
    cfg = ChannelConfig(num_channels=8, noise_power=0.5, power_budget=1.0)
    gains = rng.uniform(1.0, 8.0, 8)
    powers = rng.dirichlet(np.ones(8))
    base = sum_rate(ChannelState(gains=gains), PowerAllocation(powers=powers), cfg)
    for _ in range(10):
        perm = rng.permutation(8)
        permuted = sum_rate(ChannelState(gains=gains[perm]),
                            PowerAllocation(powers=powers[perm]), cfg)
        assert permuted == pytest.approx(base, rel=1e-12)


def test_doubling_noise_strictly_decreases_rate():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = int(rng.integers(1, 10))
        gains = rng.uniform(0.5, 9.0, m)
        powers = rng.dirichlet(np.ones(m)) * 0.7
        lo = sum_rate(ChannelState(gains=gains), PowerAllocation(powers=powers),
                      ChannelConfig(num_channels=m, noise_power=1.0))
        hi = sum_rate(ChannelState(gains=gains), PowerAllocation(powers=powers),
                      ChannelConfig(num_channels=m, noise_power=2.0))
        assert hi < lo


def test_uniform_allocation_values():
    alloc = uniform_allocation(ChannelConfig(num_channels=20, power_budget=10.0))
    assert np.all(alloc.powers == 0.5)
    assert alloc.total() == 10.0
    single = uniform_allocation(ChannelConfig(num_channels=1, power_budget=3.0))
    assert single.powers.tolist() == [3.0]


def test_uniform_allocation_spends_budget(cfg20):
    alloc = uniform_allocation(cfg20)
    assert alloc.spends_budget(cfg20)


def test_sum_rates_batch_matches_scalar(cfg20):
    rng = np.random.default_rng(6)
    gains = rng.uniform(1.0, 8.0, (16, 20))
    powers = 0.2 * rng.dirichlet(np.ones(20), size=16)
    batch = sum_rates(gains, powers, cfg20)
    for i in range(16):
        one = sum_rate(ChannelState(gains=gains[i]),
                       PowerAllocation(powers=powers[i]), cfg20)
        assert batch[i] == pytest.approx(one, rel=1e-12)


def test_invalid_config_and_types_rejected():
    with pytest.raises(ValueError):
        ChannelConfig(num_channels=0)
    with pytest.raises(ValueError):
        ChannelConfig(num_channels=4, noise_power=0.0)
    with pytest.raises(ValueError):
        ChannelConfig(num_channels=4, power_budget=-1.0)
    with pytest.raises(ValueError):
        ChannelState(gains=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        PowerAllocation(powers=np.array([0.1, -0.2]))

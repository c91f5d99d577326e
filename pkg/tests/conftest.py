import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from diffpower.channel import ChannelConfig, GainDistribution


@pytest.fixture
def cfg20() -> ChannelConfig:
    """Default-sized channel: 20 channels, unit noise, calibrated budget."""
    return ChannelConfig(num_channels=20)


@pytest.fixture
def t1_dist() -> GainDistribution:
    return GainDistribution.from_blocks([(10, 5.0, 8.0), (10, 3.0, 6.0)])


@pytest.fixture
def t2_dist() -> GainDistribution:
    return GainDistribution.from_blocks([(20, 1.0, 7.0)])


TINY_CONFIG = """\
[channel]
num_channels = 6
noise_power_linear = 1.0
power_budget_linear = 0.2

[gains_t1]
ranges_linear = 3x5:8, 3x3:6

[gains_t2]
ranges_linear = 6x1:7

[lifecycle]
t1_dataset_size = 400
t2_dataset_size = 400
eval_size = 200
retrain_mode = fine_tune

[gdm]
num_steps = 25
hidden_units = 48,48
epochs = 12
retrain_epochs = 6
batch_size = 64
learning_rate = 0.001

[drl]
iterations = 40
retrain_iterations = 40
batch_size = 96
hidden_units = 32,32
"""


@pytest.fixture
def tiny_config_path(tmp_path):
    """A small but complete run config for fast end-to-end CLI tests."""
    path = tmp_path / "tiny.ini"
    path.write_text(TINY_CONFIG)
    return path

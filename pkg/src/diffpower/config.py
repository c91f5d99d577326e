"""Run configuration: calibrated defaults plus INI-style load/dump.

The config file is plain sectioned key=value text; keys carry their units
(everything is linear scale). Gain ranges use a compact run-length syntax,
e.g. ``10x5:8, 10x3:6`` for ten channels on [5, 8] followed by ten on [3, 6].
"""
from __future__ import annotations

import configparser
import io as _io
from dataclasses import dataclass

from .channel import (DEFAULT_NOISE_POWER, DEFAULT_POWER_BUDGET, ChannelConfig,
                      GainDistribution)
from .drl import DEFAULT_INIT_LOG_STD, DEFAULT_POLICY_HIDDEN, DrlConfig
from .gdm import TrainConfig
from .lifecycle import ModelSettings, PhaseSchedule

DEFAULT_NUM_CHANNELS = 20
DEFAULT_T1_BLOCKS = ((10, 5.0, 8.0), (10, 3.0, 6.0))
DEFAULT_T2_BLOCKS = ((20, 1.0, 7.0),)
DEFAULT_DATASET_SIZE = 10_000


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    channel: ChannelConfig
    schedule: PhaseSchedule
    settings: ModelSettings

    def to_dict(self) -> dict:
        """Nested plain-type view, used verbatim inside run manifests."""
        s = self.settings
        return {
            "channel": {
                "num_channels": self.channel.num_channels,
                "noise_power_linear": self.channel.noise_power,
                "power_budget_linear": self.channel.power_budget,
            },
            "gains_t1": {"ranges_linear": encode_ranges(self.schedule.t1_dist)},
            "gains_t2": {"ranges_linear": encode_ranges(self.schedule.t2_dist)},
            "lifecycle": {
                "t1_dataset_size": self.schedule.t1_dataset_size,
                "t2_dataset_size": self.schedule.t2_dataset_size,
                "eval_size": s.eval_size,
                "retrain_mode": self.schedule.retrain_mode,
            },
            "gdm": {
                "num_steps": s.diffusion_steps,
                "beta_lo": s.beta_lo,
                "beta_hi": s.beta_hi,
                "hidden_units": ",".join(str(h) for h in s.hidden),
                "time_embed_dim": s.time_embed_dim,
                "epochs": s.train.epochs,
                "retrain_epochs": s.retrain_epochs,
                "batch_size": s.train.batch_size,
                "learning_rate": s.train.learning_rate,
                "val_fraction": s.train.val_fraction,
            },
            "drl": {
                "iterations": s.drl.iterations,
                "retrain_iterations": s.drl_retrain_iterations,
                "batch_size": s.drl.batch_size,
                "learning_rate": s.drl.learning_rate,
                "entropy_weight": s.drl.entropy_weight,
                "hidden_units": ",".join(str(h) for h in s.drl_hidden),
                "init_log_std": s.drl_init_log_std,
            },
        }


def encode_ranges(dist: GainDistribution) -> str:
    """Run-length encode per-channel ranges as ``NxLO:HI`` groups."""
    groups = []
    ranges = dist.ranges()
    i = 0
    while i < len(ranges):
        j = i
        while j + 1 < len(ranges) and ranges[j + 1] == ranges[i]:
            j += 1
        lo, hi = ranges[i]
        groups.append(f"{j - i + 1}x{lo!r}:{hi!r}")
        i = j + 1
    return ", ".join(groups)


def parse_ranges(text: str) -> GainDistribution:
    """Inverse of encode_ranges; a bare ``LO:HI`` means one channel."""
    ranges = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        count = 1
        body = item
        if "x" in item:
            head, body = item.split("x", 1)
            try:
                count = int(head)
            except ValueError as e:
                raise ConfigError(f"bad range repeat count in {item!r}") from e
        try:
            lo_s, hi_s = body.split(":")
            lo, hi = float(lo_s), float(hi_s)
        except ValueError as e:
            raise ConfigError(f"bad gain range {item!r}, expected LO:HI") from e
        ranges.extend([(lo, hi)] * count)
    if not ranges:
        raise ConfigError("empty gain range list")
    try:
        return GainDistribution.from_ranges(ranges)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def default_config() -> RunConfig:
    channel = ChannelConfig(num_channels=DEFAULT_NUM_CHANNELS,
                            noise_power=DEFAULT_NOISE_POWER,
                            power_budget=DEFAULT_POWER_BUDGET)
    schedule = PhaseSchedule(
        t1_dist=GainDistribution.from_blocks(DEFAULT_T1_BLOCKS),
        t2_dist=GainDistribution.from_blocks(DEFAULT_T2_BLOCKS),
        t1_dataset_size=DEFAULT_DATASET_SIZE,
        t2_dataset_size=DEFAULT_DATASET_SIZE,
    )
    return RunConfig(channel=channel, schedule=schedule, settings=ModelSettings())


def config_to_ini(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    for section, entries in cfg.to_dict().items():
        parser[section] = {k: str(v) for k, v in entries.items()}
    buf = _io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {e}") from e


def _int_tuple(raw: str) -> tuple:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def config_from_ini(text: str) -> RunConfig:
    """Parse a config file body; unknown keys are rejected, missing keys take
    the built-in defaults."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config parse error: {e}") from e

    base = default_config()
    known = base.to_dict()
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in known[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    d = base.settings
    try:
        channel = ChannelConfig(
            num_channels=_get(parser, "channel", "num_channels", int,
                              DEFAULT_NUM_CHANNELS),
            noise_power=_get(parser, "channel", "noise_power_linear", float,
                             DEFAULT_NOISE_POWER),
            power_budget=_get(parser, "channel", "power_budget_linear", float,
                              DEFAULT_POWER_BUDGET),
        )
        t1_dist = (parse_ranges(parser.get("gains_t1", "ranges_linear"))
                   if parser.has_option("gains_t1", "ranges_linear")
                   else base.schedule.t1_dist)
        t2_dist = (parse_ranges(parser.get("gains_t2", "ranges_linear"))
                   if parser.has_option("gains_t2", "ranges_linear")
                   else base.schedule.t2_dist)
        schedule = PhaseSchedule(
            t1_dist=t1_dist,
            t2_dist=t2_dist,
            t1_dataset_size=_get(parser, "lifecycle", "t1_dataset_size", int,
                                 base.schedule.t1_dataset_size),
            t2_dataset_size=_get(parser, "lifecycle", "t2_dataset_size", int,
                                 base.schedule.t2_dataset_size),
            retrain_mode=_get(parser, "lifecycle", "retrain_mode", str,
                              base.schedule.retrain_mode),
        )
        settings = ModelSettings(
            diffusion_steps=_get(parser, "gdm", "num_steps", int, d.diffusion_steps),
            beta_lo=_get(parser, "gdm", "beta_lo", float, d.beta_lo),
            beta_hi=_get(parser, "gdm", "beta_hi", float, d.beta_hi),
            hidden=_get(parser, "gdm", "hidden_units", _int_tuple, d.hidden),
            time_embed_dim=_get(parser, "gdm", "time_embed_dim", int,
                                d.time_embed_dim),
            train=TrainConfig(
                epochs=_get(parser, "gdm", "epochs", int, d.train.epochs),
                batch_size=_get(parser, "gdm", "batch_size", int,
                                d.train.batch_size),
                learning_rate=_get(parser, "gdm", "learning_rate", float,
                                   d.train.learning_rate),
                val_fraction=_get(parser, "gdm", "val_fraction", float,
                                  d.train.val_fraction),
            ),
            retrain_epochs=_get(parser, "gdm", "retrain_epochs", int,
                                d.retrain_epochs),
            drl=DrlConfig(
                iterations=_get(parser, "drl", "iterations", int,
                                d.drl.iterations),
                batch_size=_get(parser, "drl", "batch_size", int,
                                d.drl.batch_size),
                learning_rate=_get(parser, "drl", "learning_rate", float,
                                   d.drl.learning_rate),
                entropy_weight=_get(parser, "drl", "entropy_weight", float,
                                    d.drl.entropy_weight),
            ),
            drl_retrain_iterations=_get(parser, "drl", "retrain_iterations", int,
                                        d.drl_retrain_iterations),
            drl_hidden=_get(parser, "drl", "hidden_units", _int_tuple,
                            DEFAULT_POLICY_HIDDEN),
            drl_init_log_std=_get(parser, "drl", "init_log_std", float,
                                  DEFAULT_INIT_LOG_STD),
            eval_size=_get(parser, "lifecycle", "eval_size", int, d.eval_size),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e

    if channel.num_channels != schedule.t1_dist.num_channels:
        raise ConfigError("gains_t1 channel count does not match [channel]")
    if channel.num_channels != schedule.t2_dist.num_channels:
        raise ConfigError("gains_t2 channel count does not match [channel]")
    return RunConfig(channel=channel, schedule=schedule, settings=settings)


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return config_from_ini(text)

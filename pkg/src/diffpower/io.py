"""File formats and atomic persistence.

Checkpoints are versioned self-describing JSON (parameters, architecture,
activation, normalization constants, diffusion schedule, channel block and
the master seed). Datasets, metrics and loss curves are comma-separated text
with a header row. Every write goes through a temp-file rename so an
interrupted run never leaves a half-written artifact. Floats are emitted via
repr, which round-trips exactly, so identical runs produce identical bytes.
"""
from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .channel import ChannelConfig
from .drl import PolicyModel
from .gdm import Denoiser, DiffusionSchedule, make_schedule
from .lifecycle import ExpertDataset, RunMetrics
from .nn import DenseNet

CHECKPOINT_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
GDM_KIND = "gdm_denoiser"
POLICY_KIND = "drl_policy"


class CheckpointError(ValueError):
    """Unreadable, corrupt or incompatible checkpoint."""


class DatasetError(ValueError):
    """Unreadable or malformed dataset file."""


def fmt(x) -> str:
    """Canonical text form of one cell."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write_text(path, text: str):
    """Write-then-rename so readers never observe partial content."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


# ---------------------------------------------------------------- checkpoints

def _channel_block(cfg: ChannelConfig) -> dict:
    return {
        "num_channels": cfg.num_channels,
        "noise_power_linear": cfg.noise_power,
        "power_budget_linear": cfg.power_budget,
    }


def denoiser_checkpoint(denoiser: Denoiser, sched: DiffusionSchedule,
                        cfg: ChannelConfig, master_seed: int | None) -> dict:
    return {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": GDM_KIND,
        "tool_version": __version__,
        "layer_dims": list(denoiser.net.layer_dims),
        "hidden_activation": denoiser.net.hidden_activation,
        "params": denoiser.net.params.tolist(),
        "condition_dim": denoiser.condition_dim,
        "action_dim": denoiser.action_dim,
        "time_embed_dim": denoiser.time_embed_dim,
        "cond_center": denoiser.cond_center,
        "cond_scale": denoiser.cond_scale,
        "schedule": {
            "num_steps": sched.num_steps,
            "beta_lo": float(sched.betas[0]),
            "beta_hi": float(sched.betas[-1]),
        },
        "channel": _channel_block(cfg),
        "master_seed": master_seed,
    }


def policy_checkpoint(policy: PolicyModel, cfg: ChannelConfig,
                      master_seed: int | None) -> dict:
    return {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": POLICY_KIND,
        "tool_version": __version__,
        "layer_dims": list(policy.net.layer_dims),
        "hidden_activation": policy.net.hidden_activation,
        "params": policy.net.params.tolist(),
        "num_channels": policy.num_channels,
        "log_std_min": policy.log_std_min,
        "log_std_max": policy.log_std_max,
        "cond_center": policy.cond_center,
        "cond_scale": policy.cond_scale,
        "channel": _channel_block(cfg),
        "master_seed": master_seed,
    }


def save_checkpoint(path, payload: dict):
    atomic_write_text(path, json.dumps(payload, indent=1) + "\n")


def _require(payload: dict, key: str):
    if key not in payload:
        raise CheckpointError(f"checkpoint is missing field {key!r}")
    return payload[key]


def load_checkpoint_payload(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise CheckpointError(f"checkpoint {path} has no top-level object")
    version = _require(payload, "schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointError(
            f"checkpoint schema {version} unsupported (expected {CHECKPOINT_SCHEMA_VERSION})")
    return payload


def _net_from_payload(payload: dict) -> DenseNet:
    dims = tuple(_require(payload, "layer_dims"))
    params = np.asarray(_require(payload, "params"), dtype=np.float64)
    try:
        return DenseNet(layer_dims=dims, params=params,
                        hidden_activation=_require(payload, "hidden_activation"))
    except ValueError as e:
        raise CheckpointError(f"inconsistent checkpoint network: {e}") from e


def channel_from_payload(payload: dict) -> ChannelConfig:
    block = _require(payload, "channel")
    return ChannelConfig(num_channels=int(block["num_channels"]),
                         noise_power=float(block["noise_power_linear"]),
                         power_budget=float(block["power_budget_linear"]))


def load_denoiser(path) -> tuple[Denoiser, DiffusionSchedule, ChannelConfig]:
    payload = load_checkpoint_payload(path)
    if _require(payload, "kind") != GDM_KIND:
        raise CheckpointError(f"expected a {GDM_KIND} checkpoint, got {payload['kind']!r}")
    net = _net_from_payload(payload)
    try:
        denoiser = Denoiser(
            net=net,
            condition_dim=int(_require(payload, "condition_dim")),
            action_dim=int(_require(payload, "action_dim")),
            time_embed_dim=int(_require(payload, "time_embed_dim")),
            cond_center=float(_require(payload, "cond_center")),
            cond_scale=float(_require(payload, "cond_scale")),
        )
        block = _require(payload, "schedule")
        sched = make_schedule(int(block["num_steps"]), float(block["beta_lo"]),
                              float(block["beta_hi"]))
        return denoiser, sched, channel_from_payload(payload)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"inconsistent checkpoint contents: {e}") from e


def load_policy(path) -> tuple[PolicyModel, ChannelConfig]:
    payload = load_checkpoint_payload(path)
    if _require(payload, "kind") != POLICY_KIND:
        raise CheckpointError(f"expected a {POLICY_KIND} checkpoint, got {payload['kind']!r}")
    net = _net_from_payload(payload)
    try:
        policy = PolicyModel(
            net=net,
            num_channels=int(_require(payload, "num_channels")),
            log_std_min=float(_require(payload, "log_std_min")),
            log_std_max=float(_require(payload, "log_std_max")),
            cond_center=float(_require(payload, "cond_center")),
            cond_scale=float(_require(payload, "cond_scale")),
        )
        return policy, channel_from_payload(payload)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"inconsistent checkpoint contents: {e}") from e


# ------------------------------------------------------------------ datasets

def dataset_to_csv(dataset: ExpertDataset) -> str:
    m = dataset.num_channels
    header = ([f"g{i + 1}" for i in range(m)] + [f"p{i + 1}" for i in range(m)]
              + ["sum_rate"])
    lines = [",".join(header)]
    for row in range(len(dataset)):
        cells = ([fmt(v) for v in dataset.gains[row]]
                 + [fmt(v) for v in dataset.powers[row]]
                 + [fmt(dataset.rates[row])])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_dataset(path, dataset: ExpertDataset):
    atomic_write_text(path, dataset_to_csv(dataset))


def load_dataset(path, expected_channels: int | None = None) -> ExpertDataset:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
    except OSError as e:
        raise DatasetError(f"cannot read dataset {path}: {e}") from e
    if not lines:
        raise DatasetError(f"dataset {path} is empty")
    header = lines[0].split(",")
    if len(header) < 3 or len(header) % 2 == 0 or header[-1] != "sum_rate":
        raise DatasetError(f"dataset {path} has a malformed header")
    m = (len(header) - 1) // 2
    if expected_channels is not None and m != expected_channels:
        raise DatasetError(
            f"dataset {path} has {m} channels, config expects {expected_channels}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != 2 * m + 1:
            raise DatasetError(f"dataset {path} line {lineno}: expected "
                               f"{2 * m + 1} columns, found {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as e:
            raise DatasetError(f"dataset {path} line {lineno}: {e}") from e
    if not rows:
        raise DatasetError(f"dataset {path} has a header but no rows")
    data = np.asarray(rows, dtype=np.float64)
    return ExpertDataset(gains=data[:, :m], powers=data[:, m:2 * m],
                         rates=data[:, 2 * m])


# ------------------------------------------------------------ metrics tables

METRICS_COLUMNS = ("phase", "method", "mean_sum_rate", "ratio_to_expert",
                   "mean_state_ratio", "improvement_over_uniform",
                   "virtuous_gain")


def metrics_to_csv(metrics: RunMetrics) -> str:
    lines = [",".join(METRICS_COLUMNS)]
    for row in metrics.table_rows():
        lines.append(",".join(fmt(row[c]) for c in METRICS_COLUMNS))
    return "\n".join(lines) + "\n"


def summary_to_csv(metrics: RunMetrics) -> str:
    lines = ["metric,value"]
    for name, value in metrics.summary_items():
        lines.append(f"{name},{fmt(value)}")
    return "\n".join(lines) + "\n"


def losses_to_csv(train_losses, val_losses) -> str:
    lines = ["epoch,train_loss,val_loss"]
    for i, (tr, va) in enumerate(zip(train_losses, val_losses)):
        lines.append(f"{i},{fmt(tr)},{fmt(va)}")
    return "\n".join(lines) + "\n"


def rewards_to_csv(curve) -> str:
    lines = ["iteration,mean_reward"]
    for i, r in enumerate(curve):
        lines.append(f"{i},{fmt(r)}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ manifest

def build_manifest(config_dict: dict, master_seed: int, backend: str,
                   outputs: list[str]) -> dict:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": {"name": "diffpower", "version": __version__},
        "created_utc": utc_now(),
        "master_seed": master_seed,
        "kernel_backend": backend,
        "config": config_dict,
        "outputs": sorted(outputs),
    }


def save_manifest(path, manifest: dict):
    atomic_write_text(path, json.dumps(manifest, indent=1) + "\n")

"""Command-line entry point.

Subcommands: collect, train, evaluate, lifecycle, print-default-config.
Exit codes: 0 success, 1 usage error (bad flags or unreadable config),
2 runtime failure (bad data, incompatible checkpoint, compute error).
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import config as config_mod
from . import gdm, io, lifecycle
from .backends import BACKEND_NAME
from .seeding import substream

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

EVAL_CSV_COLUMNS = ("kind", "phase", "num_states", "mean_sum_rate",
                    "expert_mean_sum_rate", "uniform_mean_sum_rate",
                    "ratio_to_expert", "mean_state_ratio",
                    "improvement_over_uniform")


class CliError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _phase_dist(cfg: config_mod.RunConfig, phase: str):
    return cfg.schedule.t1_dist if phase == "t1" else cfg.schedule.t2_dist


def cmd_print_default_config(args) -> int:
    sys.stdout.write(config_mod.config_to_ini(config_mod.default_config()))
    return EXIT_OK


def cmd_collect(args) -> int:
    cfg = config_mod.load_config(args.config)
    dist = _phase_dist(cfg, args.phase)
    n = args.num_samples
    if n is None:
        n = (cfg.schedule.t1_dataset_size if args.phase == "t1"
             else cfg.schedule.t2_dataset_size)
    dataset = lifecycle.collect_dataset(dist, n, cfg.channel,
                                        substream(args.seed, "collect"),
                                        source_phase=args.phase)
    io.save_dataset(args.out, dataset)
    print(f"wrote {len(dataset)} expert pairs ({args.phase}) to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = config_mod.load_config(args.config)
    dataset = io.load_dataset(args.dataset, expected_channels=cfg.channel.num_channels)
    settings = cfg.settings
    dsched = settings.diffusion_schedule()
    denoiser = gdm.make_denoiser(cfg.channel.num_channels,
                                 substream(args.seed, "model_init"),
                                 hidden=settings.hidden,
                                 time_embed_dim=settings.time_embed_dim)
    targets = gdm.normalize_target(dataset.powers, cfg.channel.power_budget)
    denoiser, history = gdm.train(denoiser, dataset.gains, targets, dsched,
                                  settings.train, substream(args.seed, "train"))
    io.save_checkpoint(args.out, io.denoiser_checkpoint(denoiser, dsched,
                                                        cfg.channel, args.seed))
    losses_path = args.losses or os.path.splitext(args.out)[0] + ".losses.csv"
    io.atomic_write_text(losses_path,
                         io.losses_to_csv(history.train_losses, history.val_losses))
    print(f"trained {len(history.train_losses)} epochs; "
          f"best val loss {history.best_val_loss:.6f} at epoch {history.best_epoch}; "
          f"checkpoint {args.out}")
    return EXIT_OK


def _check_channel_match(ck_cfg, cfg) -> None:
    if (ck_cfg.num_channels != cfg.num_channels
            or ck_cfg.noise_power != cfg.noise_power
            or ck_cfg.power_budget != cfg.power_budget):
        raise io.CheckpointError(
            "checkpoint channel block does not match the config: "
            f"checkpoint {dataclasses.asdict(ck_cfg)}, config {dataclasses.asdict(cfg)}")


def cmd_evaluate(args) -> int:
    cfg = config_mod.load_config(args.config)
    payload = io.load_checkpoint_payload(args.checkpoint)
    kind = payload.get("kind")
    rng = substream(args.seed, "eval")
    num_states = args.num_states or cfg.settings.eval_size
    from .channel import sample_gains_batch
    gains = sample_gains_batch(_phase_dist(cfg, args.phase), num_states, rng)

    if kind == io.GDM_KIND:
        denoiser, dsched, ck_channel = io.load_denoiser(args.checkpoint)
        _check_channel_match(ck_channel, cfg.channel)
        ev = lifecycle.evaluate_phase(args.phase, gains, cfg.channel,
                                      denoiser=denoiser, dsched=dsched, rng=rng)
        method = lifecycle.METHOD_GDM
    elif kind == io.POLICY_KIND:
        policy, ck_channel = io.load_policy(args.checkpoint)
        _check_channel_match(ck_channel, cfg.channel)
        ev = lifecycle.evaluate_phase(args.phase, gains, cfg.channel,
                                      policy=policy, rng=rng)
        method = lifecycle.METHOD_DRL
    else:
        raise io.CheckpointError(f"unknown checkpoint kind {kind!r}")

    row = (kind, args.phase, num_states, io.fmt(ev.mean(method)),
           io.fmt(ev.mean(lifecycle.METHOD_EXPERT)),
           io.fmt(ev.mean(lifecycle.METHOD_UNIFORM)),
           io.fmt(ev.ratio_to_expert(method)),
           io.fmt(ev.mean_state_ratio(method)),
           io.fmt(ev.improvement_over_uniform(method)))
    text = ",".join(EVAL_CSV_COLUMNS) + "\n" + ",".join(str(c) for c in row) + "\n"
    sys.stdout.write(text)
    if args.out:
        io.atomic_write_text(args.out, text)
    return EXIT_OK


def cmd_lifecycle(args) -> int:
    cfg = config_mod.load_config(args.config)
    if args.retrain_mode:
        cfg = config_mod.RunConfig(
            channel=cfg.channel,
            schedule=dataclasses.replace(cfg.schedule, retrain_mode=args.retrain_mode),
            settings=cfg.settings,
        )
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)

    def path(name):
        return os.path.join(out_dir, name)

    outputs = ["manifest.json"]
    manifest = io.build_manifest(cfg.to_dict(), args.seed, BACKEND_NAME, outputs)
    io.save_manifest(path("manifest.json"), manifest)

    # phases run one by one so whatever finished stays on disk if a later
    # phase fails
    t1 = lifecycle.run_t1(cfg.schedule, cfg.channel, cfg.settings, args.seed)
    io.save_checkpoint(path("checkpoint_t1.json"),
                       io.denoiser_checkpoint(t1.denoiser, t1.dsched, cfg.channel,
                                              args.seed))
    io.save_checkpoint(path("policy_t1.json"),
                       io.policy_checkpoint(t1.policy, cfg.channel, args.seed))
    io.atomic_write_text(path("losses_t1.csv"),
                         io.losses_to_csv(t1.gdm_history.train_losses,
                                          t1.gdm_history.val_losses))
    io.atomic_write_text(path("rewards_t1.csv"), io.rewards_to_csv(t1.drl_curve))
    outputs += ["checkpoint_t1.json", "policy_t1.json", "losses_t1.csv",
                "rewards_t1.csv"]
    print(f"[t1] gdm ratio to expert {t1.ratio_to_expert:.4f}, "
          f"improvement over uniform {t1.improvement_over_uniform:.4f}")

    t2 = lifecycle.run_t2(t1.denoiser, t1.dsched, t1.policy, cfg.schedule,
                          cfg.channel, cfg.settings, args.seed,
                          t1.ratio_to_expert)
    print(f"[t2] shifted-ratio {t2.ratio_to_expert:.4f}, "
          f"degradation {t2.degradation:.4f}")

    t3 = lifecycle.run_t3(t1.denoiser, t1.dsched, t1.policy, t1.dataset,
                          t2.dataset, cfg.schedule, cfg.channel, cfg.settings,
                          args.seed)
    io.save_checkpoint(path("checkpoint_t3.json"),
                       io.denoiser_checkpoint(t3.denoiser, t1.dsched, cfg.channel,
                                              args.seed))
    io.save_checkpoint(path("policy_t3.json"),
                       io.policy_checkpoint(t3.policy, cfg.channel, args.seed))
    io.atomic_write_text(path("losses_t3.csv"),
                         io.losses_to_csv(t3.gdm_history.train_losses,
                                          t3.gdm_history.val_losses))
    io.atomic_write_text(path("rewards_t3.csv"), io.rewards_to_csv(t3.drl_curve))
    outputs += ["checkpoint_t3.json", "policy_t3.json", "losses_t3.csv",
                "rewards_t3.csv"]
    print(f"[t3] retrained ratio {t3.ratio_to_expert:.4f}, virtuous gain "
          f"{t3.virtuous_gain_gdm:.4f} (baseline {t3.virtuous_gain_drl:.4f})")

    metrics = lifecycle.RunMetrics(
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
    io.atomic_write_text(path("metrics.csv"), io.metrics_to_csv(metrics))
    io.atomic_write_text(path("summary.csv"), io.summary_to_csv(metrics))
    outputs += ["metrics.csv", "summary.csv"]

    manifest = io.build_manifest(cfg.to_dict(), args.seed, BACKEND_NAME, outputs)
    io.save_manifest(path("manifest.json"), manifest)
    print(f"lifecycle artifacts in {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diffpower",
                     description="Diffusion-based power allocation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("print-default-config",
                       help="print the built-in defaults as a config file")
    p.set_defaults(func=cmd_print_default_config)

    p = sub.add_parser("collect", help="sample states and label them with the "
                                       "water-filling expert")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase", choices=("t1", "t2"), default="t1")
    p.add_argument("--num-samples", type=int, default=None)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train the diffusion model on a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--losses", default=None, help="loss-curve csv path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on fresh states")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase", choices=("t1", "t2"), default="t1")
    p.add_argument("--num-states", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("lifecycle", help="run the full T1 -> T2 -> T3 cycle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--retrain-mode", choices=lifecycle.RETRAIN_MODES,
                   default=None, help="override the config's retrain mode")
    p.set_defaults(func=cmd_lifecycle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except config_mod.ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (io.CheckpointError, io.DatasetError, CliError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())

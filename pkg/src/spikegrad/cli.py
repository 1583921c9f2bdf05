"""Command-line experiment runner.

Commands: generate, train, compare, landscape. The default output root
comes from $SPIKEGRAD_OUTPUT (falling back to ./runs). Exit codes:
0 success, 2 config error, 3 data-format error, 4 resource-cap refusal.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import landscape as ls
from .config import ExperimentConfig
from .errors import ConfigError, RasterFormatError, ResourceCapError
from .losses import LossSpec
from .online import ONLINE_ALGORITHMS, make_algorithm
from .randman import RandmanSpec, make_raster
from .raster_io import raster_read, raster_write
from .train import (build_network, compare_against_bptt, make_source,
                    train_offline, train_online)


def _output_root(args):
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    return Path(os.environ.get("SPIKEGRAD_OUTPUT", "runs"))


def cmd_generate(args):
    kind = {"t-randman": "t", "r-randman": "r"}.get(args.kind)
    if kind is None:
        raise ConfigError("--kind must be t-randman or r-randman")
    spec = RandmanSpec(
        intrinsic_dim=args.dim, n_classes=args.classes, n_units=args.units,
        alpha=args.alpha, n_harmonics=args.harmonics, n_steps=args.steps,
        seed=args.seed,
    )
    raster = make_raster(spec, kind, args.examples)
    out = Path(args.out) if args.out else _output_root(args) / (
        f"{args.kind}_seed{args.seed}.spkr"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = {"kind": args.kind, "examples": args.examples,
               **{k: getattr(spec, k) for k in (
                   "intrinsic_dim", "n_classes", "n_units", "alpha",
                   "n_harmonics", "n_steps", "seed")}}
    raster_write(out, raster, sidecar=sidecar)
    print(f"wrote {raster.num_examples} examples "
          f"(T={raster.n_steps}, channels={raster.channels}, "
          f"classes={raster.n_classes}) to {out}")
    return 0


def _load_config(args):
    overrides = dict(kv.split("=", 1) for kv in (args.set or []))
    if args.config:
        config = ExperimentConfig.from_file(args.config, overrides)
    else:
        config = ExperimentConfig()
        for key, raw in overrides.items():
            config.set_key(key, raw)
    for flag, key in (("algorithm", "algorithm"), ("mode", "mode"),
                      ("seed", "seed"), ("minibatches", "schedule.minibatches"),
                      ("output_dir", "output_dir")):
        value = getattr(args, flag, None)
        if value is not None:
            config.set_key(key, str(value))
    if getattr(args, "report_memory", False):
        config.report_memory = True
    if getattr(args, "cosine", False):
        config.compare_with_bptt = True
    return config


def _print_memory_report(config, net):
    for name in ONLINE_ALGORITHMS:
        lif = net.lif
        algo = make_algorithm(name, lif=lif, reset_mode=config.reset_mode)
        state = algo.init_state(net, 1)
        counts = algo.trace_elements(state, 1)
        per_layer = ", ".join(
            f"layer{l}={c}" for l, c in enumerate(counts)
        )
        print(f"trace elements [{name}]: {per_layer} (total {sum(counts)})")


def cmd_train(args):
    config = _load_config(args).validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = make_source(config)
    net = build_network(config, source.n_channels, source.n_classes)
    if config.report_memory:
        _print_memory_report(config, net)
    ls.save_checkpoint(out_dir / "initial.npz", net)
    run = train_offline if config.mode == "offline" else train_online
    log, net = run(config)
    tag = f"{config.algorithm}_{config.mode}_seed{config.seed}"
    log.write_config(out_dir / f"{tag}.config.json")
    log.to_csv(out_dir / f"{tag}.csv")
    ls.save_checkpoint(out_dir / f"{tag}.final.npz", net)
    for k, weights in enumerate(log.checkpoints):
        probe = net.copy()
        probe.weights = weights
        ls.save_checkpoint(out_dir / f"{tag}.ckpt{k:04d}.npz", probe)
    final_acc = [r["val_accuracy"] for r in log.records
                 if r.get("val_accuracy") is not None][-1]
    print(f"finished {tag}: final validation accuracy {final_acc:.4f}; "
          f"log at {out_dir / (tag + '.csv')}")
    return 0


def cmd_compare(args):
    config = _load_config(args).validate()
    algorithms = (args.algorithms.split(",") if args.algorithms
                  else ["ostl", "ottt", "otpe", "approx_otpe"])
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log, _ = compare_against_bptt(config, algorithms)
    tag = f"compare_seed{config.seed}"
    log.write_config(out_dir / f"{tag}.config.json")
    log.to_csv(out_dir / f"{tag}.csv")
    print(f"wrote cosine-similarity log to {out_dir / (tag + '.csv')}")
    return 0


def cmd_landscape(args):
    center = ls.load_checkpoint(args.center)
    d1 = ls.direction(ls.load_checkpoint(args.delta).weights, center.weights)
    d2 = ls.direction(ls.load_checkpoint(args.nu).weights, center.weights)
    raster = raster_read(args.eval_set)
    loss_spec = LossSpec(kind=args.loss_kind, n_classes=raster.n_classes,
                         out_leak=args.out_leak)
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.grid_points)
    betas = np.linspace(args.beta_min, args.beta_max, args.grid_points)
    grid = ls.landscape_grid(center, d1, d2, alphas, betas,
                             raster.spikes, raster.labels, loss_spec)
    out_dir = _output_root(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    ls.grid_to_csv(out_dir / "landscape_grid.csv", grid, alphas, betas)
    if args.trajectory:
        checkpoints = [ls.load_checkpoint(p).weights for p in args.trajectory]
        proj = ls.trajectory_project(checkpoints, center.weights, d1, d2)
        ls.trajectory_to_csv(out_dir / "landscape_trajectory.csv", proj)
        print(f"wrote grid and {len(proj)}-point trajectory to {out_dir}")
    else:
        print(f"wrote grid to {out_dir / 'landscape_grid.csv'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spikegrad",
        description="Online gradient-approximation experiments for "
                    "feed-forward spiking networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic spike raster")
    p.add_argument("--kind", required=True,
                   help="t-randman or r-randman")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--units", type=int, default=50)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--harmonics", type=int, default=4)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--examples", type=int, default=1000)
    p.add_argument("--out", default="")
    p.add_argument("--output-dir", dest="output_dir", default="")
    p.set_defaults(func=cmd_generate)

    for name, func in (("train", cmd_train), ("compare", cmd_compare)):
        p = sub.add_parser(name)
        p.add_argument("--config", default="")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config key")
        p.add_argument("--algorithm", default=None)
        p.add_argument("--mode", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--minibatches", type=int, default=None)
        p.add_argument("--output-dir", dest="output_dir", default=None)
        p.add_argument("--report-memory", action="store_true")
        if name == "train":
            p.add_argument("--cosine", action="store_true",
                           help="record cosine-vs-BPTT columns (offline only)")
        else:
            p.add_argument("--algorithms", default="",
                           help="comma-separated list to compare against BPTT")
        p.set_defaults(func=func)

    p = sub.add_parser("landscape")
    p.add_argument("--center", required=True)
    p.add_argument("--delta", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--eval-set", required=True, dest="eval_set")
    p.add_argument("--loss-kind", default="sequence_ce_on_sum")
    p.add_argument("--out-leak", type=float, default=1.0)
    p.add_argument("--alpha-min", type=float, default=-1.0)
    p.add_argument("--alpha-max", type=float, default=2.0)
    p.add_argument("--beta-min", type=float, default=-1.0)
    p.add_argument("--beta-max", type=float, default=2.0)
    p.add_argument("--grid-points", type=int, default=21)
    p.add_argument("--trajectory", nargs="*", default=[])
    p.add_argument("--output-dir", dest="output_dir", default="")
    p.set_defaults(func=cmd_landscape)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except RasterFormatError as err:
        print(f"data format error: {err}", file=sys.stderr)
        return 3
    except ResourceCapError as err:
        print(f"resource cap: {err}", file=sys.stderr)
        return 4
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

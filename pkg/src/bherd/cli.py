"""Experiment runner CLI.

Usage::

    python -m bherd --config exp.cfg --strategy bherd --dataset synth --out results/

Writes, under the output directory:

* ``run_<k>/metrics.csv``    one row per round
* ``run_<k>/selection.csv``  (round, client, selected indices) debug dump
* ``summary.csv``            per-round mean/std across the ensemble
* ``config.echo``            the fully resolved configuration

Exit codes: 0 success, 2 config error, 3 runtime/numeric error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .config import ExperimentConfig, parse_config
from .errors import BherdError, ConfigError, FormatError, RoundError
from .federation import build_dataset, run_experiment
from .metrics import RoundRecord


def _fmt(x: float) -> str:
    # repr() of a Python float is the shortest round-tripping decimal.
    return repr(float(x))


def metrics_header(n_clients: int) -> list[str]:
    return (
        ["t", "loss", "accuracy"]
        + [f"distance_{i + 1}" for i in range(n_clients)]
        + ["delta_t", "sigma2"]
    )


def write_metrics_csv(path, records: list[RoundRecord], n_clients: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(metrics_header(n_clients))
        for r in records:
            writer.writerow(
                [r.t, _fmt(r.global_loss), _fmt(r.test_accuracy)]
                + [_fmt(d) for d in r.distances]
                + [_fmt(r.delta_t), _fmt(r.sigma2)]
            )


def write_selection_csv(path, records: list[RoundRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "client", "indices"])
        for r in records:
            for client, order in enumerate(r.selected_indices):
                writer.writerow([r.t, client, " ".join(str(i) for i in order)])


def write_summary_csv(path, per_run: list[list[RoundRecord]]) -> None:
    """Per-round mean/std across runs of loss, accuracy and mean distance."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "loss_mean", "loss_std", "accuracy_mean", "accuracy_std",
             "distance_mean", "distance_std"]
        )
        rounds = len(per_run[0])
        for t in range(rounds):
            losses = np.array([run[t].global_loss for run in per_run])
            accs = np.array([run[t].test_accuracy for run in per_run])
            dists = np.array([np.nanmean(run[t].distances) for run in per_run])
            writer.writerow(
                [t]
                + [_fmt(v) for v in (losses.mean(), losses.std(), accs.mean(),
                                     accs.std(), dists.mean(), dists.std())]
            )


def write_config_echo(path, cfg: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        for key, value in cfg.items():
            if isinstance(value, bool):
                value = "on" if value else "off"
            fh.write(f"{key}={value}\n")


def run(cfg: ExperimentConfig) -> None:
    """Execute the configured ensemble and persist all outputs."""
    os.makedirs(cfg.out, exist_ok=True)
    dataset = None
    per_run = []
    for k in range(cfg.runs):
        seed = cfg.seed + k
        if cfg.dataset == "mnist" and dataset is None:
            dataset = build_dataset(cfg, seed)  # fixed files; load once
        try:
            records, _ = run_experiment(cfg, seed=seed, dataset=dataset)
        except RoundError as err:
            raise RoundError(
                f"run {k}, round {err.round_index}: {err}",
                round_index=err.round_index,
                client=err.client,
                step=err.step,
            ) from None
        run_dir = os.path.join(cfg.out, f"run_{k}")
        os.makedirs(run_dir, exist_ok=True)
        write_metrics_csv(os.path.join(run_dir, "metrics.csv"), records, cfg.clients)
        if cfg.dump_selection:
            write_selection_csv(os.path.join(run_dir, "selection.csv"), records)
        per_run.append(records)
    write_summary_csv(os.path.join(cfg.out, "summary.csv"), per_run)
    write_config_echo(os.path.join(cfg.out, "config.echo"), cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bherd", description="Federated BHerd experiment runner")
    p.add_argument("--config", metavar="PATH", help="key=value config file")
    p.add_argument("--strategy", dest="strategy")
    p.add_argument("--case", dest="case", type=int, choices=(1, 2, 3))
    p.add_argument("--alpha", dest="alpha", type=float)
    p.add_argument("--epochs", dest="epochs", type=float)
    p.add_argument("--batch", dest="batch", type=int)
    p.add_argument("--clients", dest="clients", type=int)
    p.add_argument("--rounds", dest="rounds", type=int)
    p.add_argument("--lr", dest="lr", type=float)
    p.add_argument("--rr", dest="rr", choices=("on", "off"))
    p.add_argument("--runs", dest="runs", type=int)
    p.add_argument("--seed", dest="seed", type=int)
    p.add_argument("--out", dest="out")
    p.add_argument("--dataset", dest="dataset", choices=("mnist", "synth"))
    p.add_argument("--mnist-dir", dest="mnist_dir")
    p.add_argument("--lam", dest="lam", type=float)
    p.add_argument("--workers", dest="workers", type=int)
    p.add_argument("--probes", dest="probes", choices=("on", "off"))
    p.add_argument("--dump-selection", dest="dump_selection", choices=("on", "off"))
    p.add_argument("--synth-classes", dest="synth_classes", type=int)
    p.add_argument("--synth-per-class", dest="synth_per_class", type=int)
    p.add_argument("--synth-features", dest="synth_features", type=int)
    p.add_argument("--synth-spread", dest="synth_spread", type=float)
    return p


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    config_path = args.pop("config")
    try:
        cfg = parse_config(config_path, overrides=args)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        run(cfg)
    except (ConfigError, FormatError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4
    except BherdError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

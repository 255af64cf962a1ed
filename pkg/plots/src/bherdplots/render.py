"""Render experiment CSV logs into publication-style figures.

Consumes the output tree of the ``bherd`` command line tool: per-run
``metrics.csv`` / ``selection.csv`` files and an ensemble ``summary.csv``.
Three figure kinds are supported:

* ``curves``     loss and accuracy vs round, one legend entry per input
                 directory, with mean +/- std bands when a directory holds
                 several runs
* ``index-map``  per-client heatmaps of which batch indices were selected
                 each round (binary presence)
* ``distance``   the per-client selection-distance trajectories
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import InputError, SchemaError

KINDS = ("curves", "index-map", "distance")


@dataclass
class PlotSpec:
    kind: str
    inputs: list[Path]
    out: Path
    labels: list[str] = field(default_factory=list)
    dpi: int = 120

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise InputError("at least one input directory is required")
        if self.labels and len(self.labels) != len(self.inputs):
            raise InputError(
                f"{len(self.labels)} labels given for {len(self.inputs)} inputs"
            )

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels else self.inputs[i].name


def _read_csv(path: Path, required: list[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        return list(reader)


def run_dirs(root: Path) -> list[Path]:
    """Directories holding a metrics.csv: the root itself or its run_<k> children."""
    if (root / "metrics.csv").is_file():
        return [root]
    runs = sorted(
        (p for p in root.glob("run_*") if (p / "metrics.csv").is_file()),
        key=lambda p: int(re.sub(r"\D", "", p.name) or 0),
    )
    if not runs:
        raise InputError(f"{root}: no metrics.csv found (directly or under run_*/)")
    return runs


def load_metrics(root: Path) -> dict[str, np.ndarray]:
    """Per-round arrays averaged across runs, plus std for loss/accuracy.

    Returns keys: t, loss, loss_std, accuracy, accuracy_std, and
    distances with shape (rounds, clients).
    """
    losses, accs, dists = [], [], []
    t = None
    for run in run_dirs(root):
        rows = _read_csv(run / "metrics.csv", ["t", "loss", "accuracy"])
        if not rows:
            raise InputError(f"{run / 'metrics.csv'}: no data rows")
        dist_cols = sorted(
            (c for c in rows[0] if c.startswith("distance_")),
            key=lambda c: int(c.split("_")[1]),
        )
        t_run = np.array([int(r["t"]) for r in rows])
        if t is None:
            t = t_run
        elif len(t_run) != len(t):
            raise InputError(f"{run}: round count differs from the first run")
        losses.append([float(r["loss"]) for r in rows])
        accs.append([float(r["accuracy"]) for r in rows])
        dists.append([[float(r[c]) for c in dist_cols] for r in rows])
    losses, accs, dists = np.array(losses), np.array(accs), np.array(dists)
    return {
        "t": t,
        "loss": losses.mean(axis=0),
        "loss_std": losses.std(axis=0),
        "accuracy": accs.mean(axis=0),
        "accuracy_std": accs.std(axis=0),
        "distances": dists.mean(axis=0),
    }


def load_selection(root: Path) -> dict[int, list[tuple[int, list[int]]]]:
    """Selected indices per client: {client: [(round, indices), ...]}."""
    run = run_dirs(root)[0]
    path = run / "selection.csv"
    if not path.is_file():
        raise InputError(f"{path}: selection dump not found (was it disabled?)")
    rows = _read_csv(path, ["t", "client", "indices"])
    per_client: dict[int, list[tuple[int, list[int]]]] = {}
    for row in rows:
        indices = [int(tok) for tok in row["indices"].split()]
        per_client.setdefault(int(row["client"]), []).append((int(row["t"]), indices))
    if not per_client:
        raise InputError(f"{path}: no selection rows")
    return per_client


def _new_figure(n_axes: int, width: float = 6.0, height: float = 3.2):
    fig, axes = plt.subplots(
        1, n_axes, figsize=(width * n_axes, height), squeeze=False, layout="constrained"
    )
    return fig, axes[0]


def render_curves(spec: PlotSpec):
    fig, (ax_loss, ax_acc) = _new_figure(2)
    for i, root in enumerate(spec.inputs):
        m = load_metrics(root)
        label = spec.label(i)
        for ax, key in ((ax_loss, "loss"), (ax_acc, "accuracy")):
            (line,) = ax.plot(m["t"], m[key], label=label)
            if np.any(m[f"{key}_std"] > 0):
                ax.fill_between(
                    m["t"], m[key] - m[f"{key}_std"], m[key] + m[f"{key}_std"],
                    alpha=0.2, color=line.get_color(), linewidth=0,
                )
    for ax, title in ((ax_loss, "global loss"), (ax_acc, "test accuracy")):
        ax.set_xlabel("round")
        ax.set_title(title)
        ax.legend()
    return fig


def render_index_map(spec: PlotSpec):
    per_client = load_selection(spec.inputs[0])
    clients = sorted(per_client)
    fig, axes = _new_figure(len(clients), width=4.0)
    for ax, client in zip(axes, clients):
        entries = per_client[client]
        rounds = [t for t, _ in entries]
        depth = max((max(idx, default=0) for _, idx in entries), default=0) + 1
        grid = np.zeros((depth, max(rounds) + 1))
        for t, indices in entries:
            grid[indices, t] = 1.0
        ax.imshow(grid, aspect="auto", origin="lower", cmap="Greys",
                  interpolation="nearest")
        ax.set_title(f"client {client}")
        ax.set_xlabel("round")
        ax.set_ylabel("batch index")
    if len(spec.inputs) > 1:
        fig.suptitle(spec.label(0))
    return fig


def render_distance(spec: PlotSpec):
    fig, axes = _new_figure(len(spec.inputs))
    for ax, i in zip(axes, range(len(spec.inputs))):
        m = load_metrics(spec.inputs[i])
        if m["distances"].shape[1] == 0:
            raise SchemaError(f"{spec.inputs[i]}: missing column 'distance_1'")
        for client in range(m["distances"].shape[1]):
            ax.plot(m["t"], m["distances"][:, client], label=f"client {client}")
        ax.set_xlabel("round")
        ax.set_title(spec.label(i))
        ax.legend()
    axes[0].set_ylabel("selection distance")
    return fig


_RENDERERS = {
    "curves": render_curves,
    "index-map": render_index_map,
    "distance": render_distance,
}


def render(spec: PlotSpec) -> Path:
    """Render one figure and write it to ``spec.out``; returns the path."""
    fig = _RENDERERS[spec.kind](spec)
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(spec.out, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return spec.out

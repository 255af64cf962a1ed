"""Per-round diagnostics: loss/accuracy records, selection distance and
empirical probes of the quantities appearing in the convergence analysis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BherdError, InsufficientDataError
from .selection import GradientBuffer, SelectionOutcome


@dataclass
class RoundRecord:
    t: int
    global_loss: float
    test_accuracy: float
    distances: list[float]  # one per client; NaN if nothing was selected
    selected_indices: list[tuple[int, ...]]  # one index tuple per client
    delta_t: float = float("nan")
    sigma2: float = float("nan")
    grad_norm_sq: float = float("nan")
    wall_time: float = 0.0
    trajectories: list[np.ndarray] | None = field(default=None, repr=False)


def selection_distance(outcome: SelectionOutcome, buf: GradientBuffer) -> float:
    """|| g/k - mu ||: how far the selected average sits from the buffer mean."""
    if outcome.k == 0:
        raise BherdError("selection distance undefined for an empty selection")
    return float(np.linalg.norm(outcome.g / outcome.k - buf.mean()))


def probe_round(w_t: np.ndarray, trajectories, frozen_grads) -> tuple[float, float]:
    """(Delta_t, sigma^2-hat) for one round.

    Delta_t is the largest distance between the round-start parameters and
    any local iterate; sigma^2-hat is the worst per-client mean squared
    deviation of the frozen-parameter batch gradients from their mean.
    """
    delta = 0.0
    for traj in trajectories:
        if len(traj):
            delta = max(delta, float(np.max(np.linalg.norm(traj - w_t, axis=1))))
    sigma2 = 0.0
    for grads in frozen_grads:
        mean = grads.mean(axis=0)
        sigma2 = max(sigma2, float(np.mean(np.sum((grads - mean) ** 2, axis=1))))
    return delta, sigma2


def grad_norm_trend(records: list[RoundRecord]) -> tuple[float, float]:
    """Mean of ||grad F(w_t)||^2 over the first and second halves of training."""
    norms = [r.grad_norm_sq for r in records if not math.isnan(r.grad_norm_sq)]
    if len(norms) < 20:
        raise InsufficientDataError(
            f"need >= 20 rounds with recorded gradient norms, have {len(norms)}"
        )
    half = len(norms) // 2
    return float(np.mean(norms[:half])), float(np.mean(norms[half:]))

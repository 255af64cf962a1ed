"""Gradient ordering and subset selection.

Two selectors are provided:

* ``herding_order`` — the offline greedy pass: center the tau stored
  gradients on their mean, then repeatedly pick the unused vector that keeps
  the running centered sum smallest in norm, stopping after the top alpha
  fraction.
* ``grab_select`` — the online sign-balancing alternative: each arriving
  gradient is centered on the running mean and either added to (selected) or
  subtracted from (discarded) the balance vector, whichever keeps it smaller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BherdError, DimensionError


@dataclass(frozen=True)
class GradientBuffer:
    """Raw per-iteration gradients of one client round, in batch order."""

    grads: np.ndarray  # (tau, d)

    def __post_init__(self):
        if self.grads.ndim != 2 or len(self.grads) == 0:
            raise DimensionError(f"gradient buffer must be (tau, d) with tau >= 1")

    @property
    def tau(self) -> int:
        return len(self.grads)

    def mean(self) -> np.ndarray:
        return self.grads.mean(axis=0)


@dataclass(frozen=True)
class SelectionOutcome:
    order: tuple[int, ...]  # chosen buffer indices, in selection order
    g: np.ndarray  # sum of the chosen raw gradients
    effective_fraction: float  # k / tau

    @property
    def k(self) -> int:
        return len(self.order)


def selected_count(alpha: float, tau: int) -> int:
    """k = clamp(round(alpha*tau), 1, tau), rounding half away from zero."""
    if not 0.0 < alpha <= 1.0:
        raise BherdError(f"alpha must be in (0, 1], got {alpha}")
    k = math.floor(alpha * tau + 0.5)
    return min(max(k, 1), tau)


def _sum_at(grads: np.ndarray, order) -> np.ndarray:
    # Ascending-index summation keeps results identical across selectors.
    return grads[np.sort(np.asarray(order, dtype=np.int64))].sum(axis=0)


def herding_order(buf: GradientBuffer, alpha: float) -> SelectionOutcome:
    """Greedy herding pass; ties in the argmin go to the lowest index."""
    grads = buf.grads
    tau = buf.tau
    k = selected_count(alpha, tau)
    centered = grads - buf.mean()
    remaining = np.arange(tau)
    s = np.zeros(grads.shape[1])
    order = []
    for _ in range(k):
        norms = np.linalg.norm(centered[remaining] + s, axis=1)
        pick = int(remaining[np.argmin(norms)])  # argmin returns first minimum
        s += centered[pick]
        order.append(pick)
        remaining = remaining[remaining != pick]
    return SelectionOutcome(
        order=tuple(order), g=_sum_at(grads, order), effective_fraction=k / tau
    )


def select_all(buf: GradientBuffer) -> SelectionOutcome:
    """Identity order, full sum — the FedAvg degenerate case."""
    tau = buf.tau
    return SelectionOutcome(
        order=tuple(range(tau)),
        g=_sum_at(buf.grads, range(tau)),
        effective_fraction=1.0,
    )


def grab_select(grads: np.ndarray) -> SelectionOutcome:
    """Online balancing over a stream of tau gradients (tau known up front).

    Running state: mean mu accumulated as mu += grad/tau, balance s, selected
    sum g.  A gradient is kept iff adding its centered version strictly
    shrinks ||s|| relative to subtracting it.
    """
    if grads.ndim != 2 or len(grads) == 0:
        raise DimensionError("grab_select needs a non-empty (tau, d) stream")
    tau, d = grads.shape
    mu = np.zeros(d)
    s = np.zeros(d)
    g = np.zeros(d)
    order = []
    for lam in range(tau):
        grad = grads[lam]
        mu += grad / tau
        z = grad - mu
        if np.linalg.norm(s + z) < np.linalg.norm(s - z):
            s += z
            g += grad
            order.append(lam)
        else:
            s -= z
    return SelectionOutcome(order=tuple(order), g=g, effective_fraction=len(order) / tau)

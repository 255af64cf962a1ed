"""Squared-hinge SVM: loss, hand-derived gradient, accuracy.

The binary task maps digit/class parity to +/-1 (even -> +1, odd -> -1).
The bias is the last coordinate of the flat parameter vector, implemented
by augmenting every feature row with a constant 1; when lam > 0 the bias is
regularized together with the weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError

from .data import Dataset, DatasetShard


@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray  # (f+1,), last entry is the bias
    lam: float = 0.0


def init_model(feature_dim: int, lam: float = 0.0) -> SvmModel:
    return SvmModel(w=np.zeros(feature_dim + 1), lam=lam)


def parity_labels(labels: np.ndarray) -> np.ndarray:
    """+1 for even classes, -1 for odd."""
    return np.where(labels % 2 == 0, 1.0, -1.0)


def _scores(w: np.ndarray, features: np.ndarray) -> np.ndarray:
    if features.shape[1] + 1 != w.shape[0]:
        raise DimensionError(
            f"feature dim {features.shape[1]} incompatible with parameter dim {w.shape[0]}"
        )
    return features @ w[:-1] + w[-1]


def svm_loss_grad(model: SvmModel, features: np.ndarray, y: np.ndarray):
    """Batch-mean squared-hinge loss and its gradient.

    loss = mean(0.5 * max(0, 1 - y*s)^2) + lam/2 * ||w||^2
    grad = mean(-max(0, 1 - y*s) * y * x~) + lam * w
    """
    if len(features) == 0:
        raise DimensionError("empty batch")
    w = model.w
    hinge = np.maximum(0.0, 1.0 - y * _scores(w, features))
    loss = 0.5 * float(np.mean(hinge**2)) + 0.5 * model.lam * float(w @ w)
    coeff = hinge * y  # (B,)
    grad = np.empty_like(w)
    grad[:-1] = -(features.T @ coeff) / len(y)
    grad[-1] = -float(np.mean(coeff))
    if model.lam:
        grad += model.lam * w
    if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
        raise NumericError("non-finite SVM loss/gradient")
    return loss, grad


def batch_loss(model: SvmModel, features: np.ndarray, y: np.ndarray) -> float:
    hinge = np.maximum(0.0, 1.0 - y * _scores(model.w, features))
    return 0.5 * float(np.mean(hinge**2)) + 0.5 * model.lam * float(model.w @ model.w)


def accuracy(model: SvmModel, features: np.ndarray, y: np.ndarray) -> float:
    """Fraction of correct sign predictions; sign(0) counts as +1."""
    if len(features) == 0:
        raise DimensionError("empty evaluation set")
    pred = np.where(_scores(model.w, features) >= 0.0, 1.0, -1.0)
    return float(np.mean(pred == y))


def global_loss(model: SvmModel, ds: Dataset, shards: list[DatasetShard]) -> float:
    """p_i-weighted average of per-client mean losses at frozen parameters."""
    total = sum(len(s) for s in shards)
    y = parity_labels(ds.labels)
    value = 0.0
    for shard in shards:
        idx = shard.indices
        value += (len(shard) / total) * batch_loss(model, ds.features[idx], y[idx])
    return value

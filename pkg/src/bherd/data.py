"""Datasets, client partitioning and per-round batch schedules.

Supports the three distribution cases used throughout the experiments:

* Case 1 (IID): samples are shuffled and split evenly across clients.
* Case 2 (label skew): each client receives a contiguous block of labels,
  so its label set is as small as possible.
* Case 3 (mixed): samples with the lower half of the labels go to the first
  half of the clients IID-style; the rest are label-skewed over the
  remaining clients.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError
from .numerics import rng_stream

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, f) float64
    labels: np.ndarray  # (n,) int64, values in [0, n_classes)
    n_classes: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ConfigError(f"features must be 2-D, got shape {self.features.shape}")
        if len(self.features) != len(self.labels):
            raise ConfigError(
                f"feature/label count mismatch: {len(self.features)} vs {len(self.labels)}"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ConfigError("labels outside [0, n_classes)")

    def __len__(self):
        return len(self.features)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class DatasetShard:
    """One client's slice of the parent dataset (indices into it)."""

    owner: int
    indices: np.ndarray = field(repr=False)  # (m,) int64

    def __len__(self):
        return len(self.indices)


def _read_idx(path, expected_magic: int, name: str) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise FormatError(f"{name}: file truncated before magic number")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expected_magic:
        raise FormatError(
            f"{name}: bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{name}: file truncated inside dimension header")
    dims = struct.unpack(f">{ndim}i", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header != count:
        raise FormatError(
            f"{name}: payload has {len(raw) - header} bytes, header promises {count}"
        )
    data = np.frombuffer(raw, dtype=np.uint8, offset=header)
    return data.reshape(dims)


def load_mnist_idx(images_path, labels_path) -> Dataset:
    """Parse the big-endian IDX pair into a Dataset with pixels in [0, 1]."""
    images = _read_idx(images_path, IMAGES_MAGIC, "images")
    labels = _read_idx(labels_path, LABELS_MAGIC, "labels")
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(features=features, labels=labels.astype(np.int64), n_classes=10)


def save_mnist_idx(ds: Dataset, images_path, labels_path, image_shape=(28, 28)) -> None:
    """Re-serialize a Dataset to the bit-exact IDX pair (round-trip of load)."""
    n = len(ds)
    pixels = np.clip(np.rint(ds.features * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", IMAGES_MAGIC, n, *image_shape))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", LABELS_MAGIC, n))
        fh.write(ds.labels.astype(np.uint8).tobytes())


def synth_dataset(
    classes: int, per_class: int, feature_dim: int, spread: float, seed: int
) -> Dataset:
    """Gaussian blobs, one unit-ball mean per class, deterministic in seed."""
    if classes < 2:
        raise ConfigError(f"classes must be >= 2, got {classes}")
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    if spread <= 0:
        raise ConfigError(f"spread must be > 0, got {spread}")
    rng = rng_stream(seed, "synth")
    means = rng.standard_normal((classes, feature_dim))
    features = np.empty((classes * per_class, feature_dim))
    labels = np.empty(classes * per_class, dtype=np.int64)
    for c in range(classes):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = means[c] + spread * rng.standard_normal((per_class, feature_dim))
        labels[block] = c
    # Interleave classes so a sequential split is not accidentally sorted.
    order = rng.permutation(len(labels))
    return Dataset(features=features[order], labels=labels[order], n_classes=classes)


def _split_even(indices: np.ndarray, n_parts: int) -> list[np.ndarray]:
    return [np.sort(part) for part in np.array_split(indices, n_parts)]


def _partition_iid(indices: np.ndarray, n_clients: int, rng) -> list[np.ndarray]:
    return _split_even(rng.permutation(indices), n_clients)


def _partition_by_label(
    indices: np.ndarray, labels: np.ndarray, n_clients: int
) -> list[np.ndarray]:
    """Contiguous label blocks per client (minimal label diversity)."""
    present = np.unique(labels[indices])
    by_label = np.argsort(labels[indices], kind="stable")
    ordered = indices[by_label]
    if n_clients <= len(present):
        label_groups = np.array_split(present, n_clients)
        parts = []
        for group in label_groups:
            mask = np.isin(labels[ordered], group)
            parts.append(np.sort(ordered[mask]))
        return parts
    # More clients than labels: equal-size contiguous slices of the sorted
    # stream, so most clients still hold a single label.
    return _split_even(ordered, n_clients)


def partition(ds: Dataset, n_clients: int, case: int, seed: int) -> list[DatasetShard]:
    """Split the dataset into N disjoint shards per the distribution case."""
    if n_clients < 1:
        raise ConfigError(f"client count must be >= 1, got {n_clients}")
    if n_clients > len(ds):
        raise ConfigError(f"more clients ({n_clients}) than samples ({len(ds)})")
    if case not in (1, 2, 3):
        raise ConfigError(f"case must be 1, 2 or 3, got {case}")
    all_indices = np.arange(len(ds), dtype=np.int64)
    if n_clients == 1:
        return [DatasetShard(owner=0, indices=all_indices)]
    rng = rng_stream(seed, "partition")
    if case == 1:
        parts = _partition_iid(all_indices, n_clients, rng)
    elif case == 2:
        parts = _partition_by_label(all_indices, ds.labels, n_clients)
    else:
        half_label = ds.n_classes // 2
        lower = all_indices[ds.labels < half_label]
        upper = all_indices[ds.labels >= half_label]
        n_iid = (n_clients + 1) // 2  # odd N: extra client goes to the IID side
        parts = _partition_iid(lower, n_iid, rng)
        parts += _partition_by_label(upper, ds.labels, n_clients - n_iid)
    shards = [DatasetShard(owner=i, indices=part) for i, part in enumerate(parts)]
    if any(len(s) == 0 for s in shards):
        raise ConfigError("partition produced an empty shard; reduce client count")
    return shards


def batch_count(shard_size: int, batch_size: int, epochs: float) -> int:
    """tau = floor(E * |D_i| / B); ragged tail batches are dropped."""
    return int(np.floor(epochs * shard_size / batch_size))


def make_batches(
    shard: DatasetShard,
    batch_size: int,
    epochs: float,
    rr: bool,
    seed: int,
    round_index: int,
) -> list[np.ndarray]:
    """Batch schedule for one round: tau index-arrays of length B.

    Without random reshuffling the permutation is frozen, so every round
    sees the identical batch list.  With rr=True it is re-drawn per round.
    Fractional epochs consume a prefix of the permutation; epochs > 1 cycle
    through it again.
    """
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    n = len(shard)
    tau = batch_count(n, batch_size, epochs)
    if tau < 1:
        raise ConfigError(
            f"client {shard.owner}: E*|D_i|={epochs * n:g} < B={batch_size} gives zero "
            "batches; use a smaller batch size"
        )
    rng = rng_stream(seed, "batches", round_index if rr else 0, shard.owner)
    perm = rng.permutation(shard.indices)
    per_epoch = max(n // batch_size, 1)
    batches = []
    for j in range(tau):
        start = (j % per_epoch) * batch_size
        batches.append(perm[start : start + batch_size])
    return batches

"""Dense float64 vector arithmetic and deterministic RNG streams.

Model parameters and gradients are plain 1-D float64 numpy arrays of a fixed
dimension d.  Every public operation validates finiteness so NaN/Inf never
propagates silently into the training loop.

Randomness is drawn from explicitly keyed streams: a stream is identified by
(seed, purpose, round, client) and always yields the same sequence no matter
how many worker threads are running.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import DimensionError, NumericError


def as_vector(values) -> np.ndarray:
    """Coerce to a finite 1-D float64 array (always copies)."""
    x = np.array(values, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    check_finite(x, "as_vector")
    return x


def check_finite(x: np.ndarray, context: str = "vector") -> None:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite entries in {context}")


def axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return a*x + y."""
    if x.shape != y.shape:
        raise DimensionError(f"axpy shape mismatch: {x.shape} vs {y.shape}")
    out = a * x + y
    check_finite(out, "axpy result")
    return out


def l2_norm(x: np.ndarray) -> float:
    check_finite(x, "l2_norm input")
    return float(np.linalg.norm(x))


def _purpose_tag(purpose: str) -> int:
    # Stable across platforms and interpreter runs (unlike hash()).
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_stream(
    seed: int, purpose: str, round_index: int = 0, client: int = 0
) -> np.random.Generator:
    """Deterministic generator keyed by (seed, purpose, round, client).

    Streams for distinct keys are statistically independent, so per-client
    work can be farmed out to threads without affecting reproducibility.
    """
    ss = np.random.SeedSequence(
        [int(seed) & 0xFFFFFFFFFFFFFFFF, _purpose_tag(purpose), int(round_index), int(client)]
    )
    return np.random.Generator(np.random.Philox(ss))

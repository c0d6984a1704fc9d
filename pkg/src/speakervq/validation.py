"""Input validation helpers shared by the estimator and the CLI layer."""

from __future__ import annotations

import numpy as np


def check_samples(x, name: str = "utterance") -> np.ndarray:
    """Coerce one utterance to a finite 1-D float array in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite samples")
    if np.max(np.abs(x)) > 1.0:
        raise ValueError(f"{name} has samples outside [-1, 1]")
    return x


def check_utterance_list(X) -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 1 and X.dtype != object:
        raise ValueError("X must be a sequence of utterances, not one 1-D array")
    utterances = [check_samples(x, name=f"X[{i}]") for i, x in enumerate(X)]
    if not utterances:
        raise ValueError("X is empty")
    return utterances


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ValueError(f"y must be 1-D with {n} entries, got shape {y.shape}")
    return y

"""Pre-emphasis, framing and windowing.

Frames are stored unwindowed together with the predictor-order history
samples that precede them; the Hamming window is applied only inside the
autocorrelation analysis.  Residual filtering therefore sees the true
signal context by default (`window_before_residual` flips that).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .corpus import Utterance


@dataclass(frozen=True)
class FrontendConfig:
    preemphasis_mu: float = 0.95
    frame_len: int = 240          # 30 ms at 8 kHz
    hop: int = 80                 # 2/3 overlap
    lpc_order: int = 10
    cepstral_order: int = 12
    window_before_residual: bool = False

    def __post_init__(self):
        if not 0.0 <= self.preemphasis_mu < 1.0:
            raise ValueError(f"preemphasis_mu must be in [0, 1), got {self.preemphasis_mu}")
        if self.frame_len < 1 or self.hop < 1:
            raise ValueError("frame_len and hop must be positive")
        if not 1 <= self.lpc_order <= self.frame_len:
            raise ValueError(f"lpc_order must be in [1, frame_len], got {self.lpc_order}")
        if self.cepstral_order < 1:
            raise ValueError("cepstral_order must be >= 1")


@dataclass
class AnalysisFrame:
    """frame_len unwindowed samples plus the lpc_order samples before them."""

    samples: np.ndarray
    history: np.ndarray
    frame_index: int
    energy: float = field(init=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.history = np.asarray(self.history, dtype=np.float64)
        self.energy = float(self.samples @ self.samples)


def preemphasize(x: np.ndarray, mu: float = 0.95) -> np.ndarray:
    """y[n] = x[n] - mu * x[n-1] with x[-1] = 0."""
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    y[1:] -= mu * x[:-1]
    return y


def deemphasize(y: np.ndarray, mu: float = 0.95) -> np.ndarray:
    """Inverse of preemphasize (IIR reconstruction)."""
    y = np.asarray(y, dtype=np.float64)
    x = np.empty_like(y)
    acc = 0.0
    for n in range(len(y)):
        acc = y[n] + mu * acc
        x[n] = acc
    return x


@lru_cache(maxsize=4)
def hamming_coefficients(n: int) -> np.ndarray:
    w = np.hamming(n)  # 0.54 - 0.46 cos(2 pi k / (n-1))
    w.flags.writeable = False
    return w


def hamming_window(frame: np.ndarray, frame_len: int = 240) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if len(frame) != frame_len:
        raise ValueError(f"expected {frame_len} samples, got {len(frame)}")
    return frame * hamming_coefficients(frame_len)


def frame_signal(y: np.ndarray, cfg: FrontendConfig) -> list[AnalysisFrame]:
    """Slice a pre-emphasized sequence into overlapping analysis frames.

    Offsets run 0, hop, 2*hop, ...; each frame carries the lpc_order
    samples preceding its start, zero-padded where the signal has none.
    """
    y = np.asarray(y, dtype=np.float64)
    n, flen, hop, p = len(y), cfg.frame_len, cfg.hop, cfg.lpc_order
    if n < flen:
        raise ValueError(f"signal length {n} shorter than one frame ({flen})")
    count = (n - flen) // hop + 1
    frames = []
    for i in range(count):
        start = i * hop
        if start >= p:
            history = y[start - p:start]
        else:
            history = np.concatenate([np.zeros(p - start), y[:start]])
        frames.append(AnalysisFrame(
            samples=y[start:start + flen], history=history, frame_index=i))
    return frames


def frames_from_utterance(utt: Utterance, cfg: FrontendConfig) -> list[AnalysisFrame]:
    return frame_signal(preemphasize(utt.samples, cfg.preemphasis_mu), cfg)

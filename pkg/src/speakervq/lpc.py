"""Short-term linear prediction per frame.

Conventions: the predictor is x_hat[n] = sum_{k=1..p} a[k] x[n-k], so the
analysis filter is A(z) = 1 - sum_k a[k] z^-k and the residual is the
output of A(z).  Autocorrelation method with a Hamming window; cepstral
coefficients c[1..q] are taken from log(1/A(z)) without the gain term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frontend import AnalysisFrame, FrontendConfig, hamming_window

# White-noise correction applied to r[0] only if the recursion hits E <= 0.
_R0_BUMP = 1e-9


@dataclass
class LpcModel:
    a: np.ndarray           # a[1..p] as a[0..p-1]
    reflection: np.ndarray  # k[1..p]
    error: float            # Levinson final prediction error E_p
    degenerate: bool = False
    stabilized: bool = False

    @property
    def order(self) -> int:
        return len(self.a)


def autocorrelate(frame: AnalysisFrame | np.ndarray, p: int,
                  frame_len: int = 240) -> np.ndarray:
    """Windowed autocorrelation r[0..p] of one frame."""
    samples = frame.samples if isinstance(frame, AnalysisFrame) else frame
    s = hamming_window(samples, frame_len)
    n = len(s)
    r = np.empty(p + 1)
    for k in range(p + 1):
        r[k] = s[: n - k] @ s[k:]
    return r


def levinson(r: np.ndarray) -> LpcModel:
    """Levinson-Durbin recursion on r[0..p].

    A silent frame (r[0] == 0) returns the all-zero degenerate model.  If
    the recursion runs into a non-positive error numerically, r[0] gets a
    tiny white-noise bump and the solve is retried once.
    """
    r = np.asarray(r, dtype=np.float64)
    p = len(r) - 1
    if r[0] <= 0.0:
        return LpcModel(a=np.zeros(p), reflection=np.zeros(p), error=0.0,
                        degenerate=True)

    def recurse(r0: float) -> tuple[np.ndarray, np.ndarray, float] | None:
        a = np.zeros(p)
        k = np.zeros(p)
        e = r0
        for i in range(1, p + 1):
            acc = r[i] - a[: i - 1] @ r[i - 1:0:-1]
            ki = acc / e
            k[i - 1] = ki
            a_prev = a[: i - 1].copy()
            a[: i - 1] = a_prev - ki * a_prev[::-1]
            a[i - 1] = ki
            e *= 1.0 - ki * ki
            if e <= 0.0:
                return None
        return a, k, e

    result = recurse(r[0])
    stabilized = False
    if result is None:
        result = recurse(r[0] * (1.0 + _R0_BUMP))
        stabilized = True
    if result is None:
        return LpcModel(a=np.zeros(p), reflection=np.zeros(p), error=0.0,
                        degenerate=True, stabilized=True)
    a, k, e = result
    return LpcModel(a=a, reflection=k, error=float(e), stabilized=stabilized)


def reflection_to_lpc(k: np.ndarray) -> np.ndarray:
    """Rebuild predictor coefficients from reflection coefficients."""
    k = np.asarray(k, dtype=np.float64)
    a = np.zeros(len(k))
    for i in range(1, len(k) + 1):
        a_prev = a[: i - 1].copy()
        a[: i - 1] = a_prev - k[i - 1] * a_prev[::-1]
        a[i - 1] = k[i - 1]
    return a


def lpc_to_cepstrum(a: np.ndarray, q: int) -> np.ndarray:
    """Cepstrum c[1..q] of log(1/A(z)) by the standard recursion."""
    a = np.asarray(a, dtype=np.float64)
    p = len(a)
    c = np.zeros(q)
    for n in range(1, q + 1):
        acc = a[n - 1] if n <= p else 0.0
        for k in range(max(1, n - p), n):
            acc += (k / n) * c[k - 1] * a[n - k - 1]
        c[n - 1] = acc
    return c


def cepstrum_fft_oracle(a: np.ndarray, q: int, nfft: int = 8192) -> np.ndarray:
    """Cepstrum of 1/A(z) via a dense log-magnitude spectrum (reference path)."""
    a = np.asarray(a, dtype=np.float64)
    poly = np.concatenate([[1.0], -a])
    spectrum = np.fft.fft(poly, nfft)
    logmag = -np.log(np.abs(spectrum))
    ceps = np.fft.ifft(logmag).real
    return 2.0 * ceps[1:q + 1]


def inverse_filter_residual(frame: AnalysisFrame, a: np.ndarray,
                            window: bool = False) -> np.ndarray:
    """Residual e[n] = s[n] - sum_k a[k] s[n-k] over one frame.

    Negative indices read from the frame history.  With window=True the
    frame is Hamming-windowed first and the history replaced by zeros
    (the autocorrelation-method view of the frame).
    """
    a = np.asarray(a, dtype=np.float64)
    p = len(a)
    if len(frame.history) < p:
        raise ValueError(f"history shorter than predictor order {p}")
    if window:
        s = hamming_window(frame.samples, len(frame.samples))
        ext = np.concatenate([np.zeros(p), s])
    else:
        s = frame.samples
        ext = np.concatenate([frame.history[-p:] if p else frame.history[:0], s])
    e = s.copy()
    n = len(s)
    for k in range(1, p + 1):
        e -= a[k - 1] * ext[p - k: p - k + n]
    return e


def prediction_gain_db(signal: np.ndarray, residual: np.ndarray) -> float:
    """10 log10 of signal energy over residual energy."""
    num = float(np.sum(np.square(signal)))
    den = float(np.sum(np.square(residual)))
    return 10.0 * np.log10(num / den)


def analyze_frames(frames: list[AnalysisFrame], cfg: FrontendConfig
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame LPCC matrix (F x q) and LPC matrix (F x p)."""
    q, p = cfg.cepstral_order, cfg.lpc_order
    lpccs = np.zeros((len(frames), q))
    lpcs = np.zeros((len(frames), p))
    for i, frame in enumerate(frames):
        model = levinson(autocorrelate(frame, p, cfg.frame_len))
        lpcs[i] = model.a
        lpccs[i] = lpc_to_cepstrum(model.a, q)
    return lpccs, lpcs

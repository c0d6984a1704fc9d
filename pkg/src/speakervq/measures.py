"""Distance measures, sentence scoring and score statistics.

Six per-frame measures: two over the 12-dim cepstral difference (mean
square error, mean absolute difference) and four over the 240-sample
inverse-filter residual (MSE, MAD, maximum absolute value, variance).
The normalized forms (means, not sums) keep the combination weight's
scale interpretable; per-measure rankings are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class MeasureKind(IntEnum):
    MSE_LPCC = 1
    MAD_LPCC = 2
    MSE_RESIDUE = 3
    MAD_RESIDUE = 4
    MAV_RESIDUE = 5
    VAR_RESIDUE = 6

    @property
    def is_coefficient(self) -> bool:
        return self in (MeasureKind.MSE_LPCC, MeasureKind.MAD_LPCC)

    @property
    def is_residual(self) -> bool:
        return not self.is_coefficient


@dataclass
class SentenceScore:
    speaker_id: str | None
    total: float
    n_frames: int

    @property
    def mean(self) -> float:
        if self.n_frames <= 0:
            raise ValueError("mean undefined for empty sentence score")
        return self.total / self.n_frames


def coefficient_distance_matrix(vectors: np.ndarray, centroids: np.ndarray,
                                kind: MeasureKind) -> np.ndarray:
    """(F x K) coefficient-domain distances between rows of two matrices."""
    diff = vectors[:, None, :] - centroids[None, :, :]
    if kind == MeasureKind.MSE_LPCC:
        return np.mean(np.square(diff), axis=2)
    if kind == MeasureKind.MAD_LPCC:
        return np.mean(np.abs(diff), axis=2)
    raise ValueError(f"{kind} is not a coefficient measure")


def residual_distances(e: np.ndarray, kind: MeasureKind) -> np.ndarray:
    """Residual-domain distance along the last axis of e."""
    if kind == MeasureKind.MSE_RESIDUE:
        return np.mean(np.square(e), axis=-1)
    if kind == MeasureKind.MAD_RESIDUE:
        return np.mean(np.abs(e), axis=-1)
    if kind == MeasureKind.MAV_RESIDUE:
        return np.max(np.abs(e), axis=-1)
    if kind == MeasureKind.VAR_RESIDUE:
        return np.var(e, axis=-1)
    raise ValueError(f"{kind} is not a residual measure")


def batch_residuals(frames, a: np.ndarray, window: bool = False) -> np.ndarray:
    """Inverse-filter residual of every frame against one predictor (F x N)."""
    from .frontend import hamming_coefficients

    a = np.asarray(a, dtype=np.float64)
    p = len(a)
    n = len(frames[0].samples)
    if window:
        w = hamming_coefficients(n)
        s = np.stack([f.samples for f in frames]) * w
        ext = np.concatenate([np.zeros((len(frames), p)), s], axis=1)
    else:
        s = np.stack([f.samples for f in frames])
        hist = np.stack([f.history[-p:] for f in frames])
        ext = np.concatenate([hist, s], axis=1)
    e = s.copy()
    for k in range(1, p + 1):
        e -= a[k - 1] * ext[:, p - k: p - k + n]
    return e


def frame_distance(frame, lpcc: np.ndarray, codeword, kind: MeasureKind,
                   window: bool = False) -> float:
    """Distance of one frame to one codeword under the chosen measure."""
    if kind.is_coefficient:
        d = coefficient_distance_matrix(
            np.asarray(lpcc, dtype=np.float64)[None, :],
            np.asarray(codeword.lpcc, dtype=np.float64)[None, :], kind)
        return float(d[0, 0])
    from .lpc import inverse_filter_residual

    e = inverse_filter_residual(frame, codeword.lpc_mean, window=window)
    return float(residual_distances(e, kind))


def sentence_distance_matrix(frames, lpccs: np.ndarray, codebook,
                             kind: MeasureKind, window: bool = False) -> np.ndarray:
    """(F x codebook size) distances of every frame to every codeword."""
    if kind.is_coefficient:
        return coefficient_distance_matrix(lpccs, codebook.centroid_matrix, kind)
    cols = []
    for cw in codebook.codewords:
        e = batch_residuals(frames, cw.lpc_mean, window=window)
        cols.append(residual_distances(e, kind))
    return np.stack(cols, axis=1)


def score_sentence(frames, lpccs: np.ndarray, codebook, kind: MeasureKind,
                   speaker_id: str | None = None, window: bool = False
                   ) -> SentenceScore:
    """Accumulated per-frame minimum distance of a sentence to one codebook."""
    if len(frames) == 0:
        raise ValueError("cannot score an empty frame list")
    d = sentence_distance_matrix(frames, lpccs, codebook, kind, window=window)
    return SentenceScore(speaker_id=speaker_id,
                         total=float(np.sum(np.min(d, axis=1))),
                         n_frames=len(frames))


def combine_scores(s_coeff: SentenceScore, s_res: SentenceScore,
                   alpha: float) -> float:
    """coefficient total + alpha * residual total for one (sentence, speaker)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if (s_coeff.speaker_id is not None and s_res.speaker_id is not None
            and s_coeff.speaker_id != s_res.speaker_id):
        raise ValueError("combined scores must target the same speaker")
    return s_coeff.total + alpha * s_res.total


@dataclass
class CombinedScoreRow:
    """Coefficient and residual totals of one sentence against every speaker."""

    sentence: str
    true_speaker: str
    coeff: dict[str, float]
    residual: dict[str, float]


def default_alpha_grid() -> np.ndarray:
    return np.logspace(-3.0, 3.0, 13)


def grid_search_alpha(rows: list[CombinedScoreRow],
                      grid: np.ndarray | None = None) -> float:
    """Pick the grid weight minimizing identification error over the rows.

    Ties break toward the smaller alpha.  Rows normally come from scoring
    the training sentences themselves (the held-out trial-and-error pass).
    """
    if grid is None:
        grid = default_alpha_grid()
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    if grid.size == 0:
        raise ValueError("alpha grid is empty")
    best_alpha, best_errors = None, None
    for alpha in grid:
        errors = 0
        for row in rows:
            combined = {spk: row.coeff[spk] + alpha * row.residual[spk]
                        for spk in row.coeff}
            predicted = min(sorted(combined), key=lambda s: (combined[s], s))
            if predicted != row.true_speaker:
                errors += 1
        if best_errors is None or errors < best_errors:
            best_alpha, best_errors = float(alpha), errors
    return best_alpha


def correlation_matrix(table: np.ndarray) -> np.ndarray:
    """Pearson correlations between score columns; NaN where variance is zero."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 2:
        raise ValueError("need a 2-D table with at least 2 rows")
    m = table.shape[1]
    std = table.std(axis=0)
    out = np.full((m, m), np.nan)
    valid = np.flatnonzero(std > 0)
    if valid.size:
        sub = np.corrcoef(table[:, valid], rowvar=False)
        sub = np.atleast_2d(sub)
        out[np.ix_(valid, valid)] = np.clip(sub, -1.0, 1.0)
    return out


@dataclass
class HistogramData:
    intra: np.ndarray
    inter: np.ndarray
    edges: np.ndarray
    intra_counts: np.ndarray
    inter_counts: np.ndarray


def distortion_histograms(rows: list[tuple[str, str, float]],
                          n_bins: int = 50) -> HistogramData:
    """Split (true speaker, model speaker, score) rows into intra/inter histograms.

    Bins are equal-width over the pooled score range; the lists are
    emitted alongside the counts so callers can re-bin or plot.
    """
    intra = np.array([s for true, model, s in rows if true == model])
    inter = np.array([s for true, model, s in rows if true != model])
    pooled = np.concatenate([intra, inter])
    if pooled.size == 0:
        raise ValueError("no scores to bin")
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, n_bins + 1)
    intra_counts, _ = np.histogram(intra, bins=edges)
    inter_counts, _ = np.histogram(inter, bins=edges)
    return HistogramData(intra=intra, inter=inter, edges=edges,
                         intra_counts=intra_counts, inter_counts=inter_counts)

"""scikit-learn style front door.

SpeakerIdentifier wraps the codebook pipeline as a classifier: X is a
sequence of 1-D sample arrays at 8 kHz (each 0.5-10 s, values in [-1, 1])
and y holds the speaker labels.  All pipeline knobs are constructor
parameters so the estimator clones and grid-searches like any other.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .corpus import TARGET_RATE, Utterance
from .frontend import FrontendConfig
from .measures import MeasureKind, grid_search_alpha
from .recognition import (SchemeSpec, SentenceFeatures, combined_score_rows,
                          compute_features, identify, train_speaker)
from .validation import check_labels, check_utterance_list


class SpeakerIdentifier(BaseEstimator, ClassifierMixin):
    """Closed-set speaker identification with per-speaker codebooks.

    Parameters
    ----------
    bits : linear codebook size exponent (2**bits codewords per speaker).
    split_method : "hyperplane" or "std_deviation" centroid splitting.
    measure : 1-6, the distance measure for linear scoring.
    scheme : decision scheme; one of linear_only, linear_combined,
        neural_only, preselect_neural, preselect_combined.
    k : shortlist size for the preselection schemes.
    alpha : combination weight, or "auto" to grid-search it on the
        training sentences.
    mlp_bits : neural codebook size exponent (defaults to `bits`).
    mlp_iterations : refinement iterations for the neural codebook.
    random_state : seed for all training randomness.
    """

    def __init__(self, bits=5, split_method="hyperplane", measure=1,
                 scheme="linear_only", k=2, alpha=1.0, residual_measure=3,
                 mlp_bits=None, mlp_iterations=0, neural_epochs=8,
                 neural_starts=5, preemphasis=0.95, frame_len=240, hop=80,
                 lpc_order=10, cepstral_order=12, window_before_residual=False,
                 random_state=0):
        self.bits = bits
        self.split_method = split_method
        self.measure = measure
        self.scheme = scheme
        self.k = k
        self.alpha = alpha
        self.residual_measure = residual_measure
        self.mlp_bits = mlp_bits
        self.mlp_iterations = mlp_iterations
        self.neural_epochs = neural_epochs
        self.neural_starts = neural_starts
        self.preemphasis = preemphasis
        self.frame_len = frame_len
        self.hop = hop
        self.lpc_order = lpc_order
        self.cepstral_order = cepstral_order
        self.window_before_residual = window_before_residual
        self.random_state = random_state

    def _frontend_config(self) -> FrontendConfig:
        return FrontendConfig(
            preemphasis_mu=self.preemphasis, frame_len=self.frame_len,
            hop=self.hop, lpc_order=self.lpc_order,
            cepstral_order=self.cepstral_order,
            window_before_residual=self.window_before_residual)

    def _needs_neural(self) -> bool:
        return self.scheme in ("neural_only", "preselect_neural",
                               "preselect_combined")

    def fit(self, X, y):
        utterances = check_utterance_list(X)
        y = check_labels(y, len(utterances))
        cfg = self._frontend_config()
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 speakers")
        labels = [str(c) for c in self.classes_]
        if len(set(labels)) != len(labels):
            raise ValueError("class labels collide after string conversion")
        self._label_of = dict(zip(labels, self.classes_))

        mlp_bits = self.bits if self.mlp_bits is None else self.mlp_bits
        bits_list = sorted({self.bits} | ({mlp_bits} if self._needs_neural() else set()))
        neural_bits = [mlp_bits] if self._needs_neural() else []

        train_feats: list[SentenceFeatures] = []
        self.models_ = []
        for cls, label in zip(self.classes_, labels):
            group = [u for u, lab in zip(utterances, y) if lab == cls]
            utts = [Utterance(speaker_id=label, sentence_id=f"t{i}",
                              sample_rate=TARGET_RATE, samples=u)
                    for i, u in enumerate(group)]
            self.models_.append(train_speaker(
                utts, cfg, bits_list, split_method=self.split_method,
                neural_bits=neural_bits,
                neural_iterations=[self.mlp_iterations],
                seed=self.random_state, neural_epochs=self.neural_epochs,
                neural_starts=self.neural_starts))
            train_feats.extend(compute_features(u, cfg) for u in utts)

        spec = SchemeSpec(scheme=self.scheme, measure=MeasureKind(self.measure),
                          residual_measure=MeasureKind(self.residual_measure),
                          k=min(self.k, len(self.models_)),
                          alpha=0.0 if self.alpha == "auto" else self.alpha,
                          linear_bits=self.bits, mlp_bits=mlp_bits,
                          mlp_iteration=self.mlp_iterations)
        if self.alpha == "auto" and spec.scheme in ("linear_combined",
                                                    "preselect_combined"):
            rows = combined_score_rows(train_feats, self.models_, spec,
                                       neural=self._needs_neural())
            spec.alpha = grid_search_alpha(rows)
        self.alpha_ = spec.alpha
        self._spec = spec
        return self

    def predict(self, X):
        self._check_fitted()
        utterances = check_utterance_list(X)
        cfg = self._frontend_config()
        out = []
        for i, samples in enumerate(utterances):
            utt = Utterance(speaker_id="?", sentence_id=f"q{i}",
                            sample_rate=TARGET_RATE, samples=samples)
            result = identify(compute_features(utt, cfg), self.models_, self._spec)
            out.append(self._label_of[result.predicted])
        return np.asarray(out)

    def decision_scores(self, X) -> list[dict]:
        """Per-speaker accumulated distances for each utterance (lower wins)."""
        self._check_fitted()
        utterances = check_utterance_list(X)
        cfg = self._frontend_config()
        tables = []
        for i, samples in enumerate(utterances):
            utt = Utterance(speaker_id="?", sentence_id=f"q{i}",
                            sample_rate=TARGET_RATE, samples=samples)
            result = identify(compute_features(utt, cfg), self.models_, self._spec)
            tables.append(result.scores)
        return tables

    def _check_fitted(self):
        if not hasattr(self, "models_"):
            raise NotFittedError("SpeakerIdentifier is not fitted yet")

"""Closed-set speaker identification with VQ codebooks and predictive residuals."""

from .codebook import (Codeword, LinearCodebook, lloyd_iterate, quantize,
                       split_hyperplane, split_stddev, train_codebook)
from .config import ConfigError, ExperimentConfig
from .corpus import (CorpusError, CorpusManifest, ManifestEntry, Utterance,
                     generate_synthetic_corpus, load_utterance, resample_2to1)
from .estimator import SpeakerIdentifier
from .frontend import (AnalysisFrame, FrontendConfig, frame_signal,
                       frames_from_utterance, hamming_window, preemphasize)
from .lpc import (LpcModel, autocorrelate, inverse_filter_residual, levinson,
                  lpc_to_cepstrum, prediction_gain_db)
from .measures import (CombinedScoreRow, HistogramData, MeasureKind,
                       SentenceScore, combine_scores, correlation_matrix,
                       distortion_histograms, frame_distance, grid_search_alpha,
                       score_sentence)
from .nonlinear import (MlpPredictor, NeuralCodebook, build_neural_codebook,
                        build_neural_codebooks, init_mlp, lm_train,
                        mlp_forward, mlp_residual, multistart_train,
                        total_min_mad)
from .recognition import (EvaluationReport, IdentificationResult, SchemeSpec,
                          SpeakerModel, compute_features, evaluate, identify,
                          identify_linear, load_speaker_model,
                          save_speaker_model, train_speaker)

__version__ = "0.1.0"

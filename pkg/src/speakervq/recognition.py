"""Speaker models, identification schemes and evaluation.

A speaker model bundles the linear codebooks (one per configured size)
and optionally MLP codebooks (per size and refinement iteration).  Five
decision schemes are supported:

  linear_only         argmin of one coefficient/residual measure
  linear_combined     coefficient total + alpha * linear-residual total
  neural_only         argmin of accumulated best-net residual MAD
  preselect_neural    K-speaker LPCC shortlist, then neural MAD decides
  preselect_combined  shortlist, then LPCC total + alpha * neural MAD total

Ties at every argmin break toward the lexicographically smaller speaker
id.  The preselection schemes evaluate the expensive nets for exactly K
speakers; an evaluation counter records that contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .codebook import Codeword, LinearCodebook, train_codebook
from .corpus import Utterance
from .frontend import AnalysisFrame, FrontendConfig, frames_from_utterance
from .lpc import analyze_frames
from .measures import (CombinedScoreRow, MeasureKind, SentenceScore,
                       combine_scores, score_sentence)
from .nonlinear import (MlpPredictor, NeuralCodebook, build_neural_codebooks,
                        net_frame_mads, speaker_key)

MODEL_SCHEMA_VERSION = 1

SCHEME_NAMES = ("linear_only", "linear_combined", "neural_only",
                "preselect_neural", "preselect_combined")


@dataclass
class SchemeSpec:
    scheme: str = "linear_only"
    measure: MeasureKind = MeasureKind.MSE_LPCC
    residual_measure: MeasureKind = MeasureKind.MSE_RESIDUE
    k: int = 2
    alpha: float = 1.0
    linear_bits: int = 5
    mlp_bits: int | None = None
    mlp_iteration: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEME_NAMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not isinstance(self.alpha, str) and self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        self.measure = MeasureKind(self.measure)
        self.residual_measure = MeasureKind(self.residual_measure)
        if not self.residual_measure.is_residual:
            raise ValueError("residual_measure must be a residual-domain measure")

    @property
    def neural_bits(self) -> int:
        return self.linear_bits if self.mlp_bits is None else self.mlp_bits


@dataclass
class SpeakerModel:
    speaker_id: str
    linear_codebooks: dict[int, LinearCodebook]
    neural_codebooks: dict[tuple[int, int], NeuralCodebook] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int = 0

    def linear(self, bits: int) -> LinearCodebook:
        try:
            return self.linear_codebooks[bits]
        except KeyError:
            raise ValueError(
                f"model {self.speaker_id} has no {bits}-bit linear codebook") from None

    def neural(self, bits: int, iteration: int) -> NeuralCodebook:
        try:
            return self.neural_codebooks[(bits, iteration)]
        except KeyError:
            raise ValueError(
                f"model {self.speaker_id} has no {bits}-bit neural codebook "
                f"at iteration {iteration}") from None


@dataclass
class SentenceFeatures:
    """Frames and per-frame analysis of one test sentence, computed once."""

    speaker_id: str
    sentence_id: str
    frames: list[AnalysisFrame]
    lpccs: np.ndarray
    cfg: FrontendConfig

    @cached_property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        from .nonlinear import frame_context_matrix
        return frame_context_matrix(self.frames)


def compute_features(utt: Utterance, cfg: FrontendConfig) -> SentenceFeatures:
    frames = frames_from_utterance(utt, cfg)
    lpccs, _ = analyze_frames(frames, cfg)
    return SentenceFeatures(speaker_id=utt.speaker_id, sentence_id=utt.sentence_id,
                            frames=frames, lpccs=lpccs, cfg=cfg)


@dataclass
class EvalCounter:
    """Counts (frame, net) residual evaluations — the flop contract probe."""

    net_frame_evals: int = 0

    def add(self, n: int) -> None:
        self.net_frame_evals += n


@dataclass
class IdentificationResult:
    predicted: str
    scores: dict[str, float]
    scheme: str
    preselection: dict[str, float] | None = None


def _argmin_speaker(scores: dict[str, float]) -> str:
    return min(sorted(scores), key=lambda s: scores[s])


def _linear_total(feat: SentenceFeatures, model: SpeakerModel,
                  measure: MeasureKind, bits: int) -> SentenceScore:
    return score_sentence(feat.frames, feat.lpccs, model.linear(bits), measure,
                          speaker_id=model.speaker_id,
                          window=feat.cfg.window_before_residual)


def _neural_total(feat: SentenceFeatures, cb: NeuralCodebook,
                  counter: EvalCounter | None) -> SentenceScore:
    X, y = feat.pairs
    flen = feat.cfg.frame_len
    mads = np.stack([net_frame_mads(net, X, y, flen) for net in cb.predictors],
                    axis=1)
    if counter is not None:
        counter.add(len(feat.frames) * cb.size)
    return SentenceScore(speaker_id=None,
                         total=float(np.sum(np.min(mads, axis=1))),
                         n_frames=len(feat.frames))


def _check_models(models: list[SpeakerModel], minimum: int = 2) -> list[SpeakerModel]:
    if len(models) < minimum:
        raise ValueError(f"need at least {minimum} speaker models")
    return sorted(models, key=lambda m: m.speaker_id)


def identify_linear(feat: SentenceFeatures, models: list[SpeakerModel],
                    measure: MeasureKind = MeasureKind.MSE_LPCC,
                    bits: int = 5) -> IdentificationResult:
    models = _check_models(models)
    scores = {m.speaker_id: _linear_total(feat, m, measure, bits).total
              for m in models}
    return IdentificationResult(predicted=_argmin_speaker(scores),
                                scores=scores, scheme="linear_only")


def identify_linear_combined(feat: SentenceFeatures, models: list[SpeakerModel],
                             spec: SchemeSpec) -> IdentificationResult:
    models = _check_models(models)
    scores = {}
    for m in models:
        s_coeff = _linear_total(feat, m, spec.measure, spec.linear_bits)
        s_res = _linear_total(feat, m, spec.residual_measure, spec.linear_bits)
        scores[m.speaker_id] = combine_scores(s_coeff, s_res, spec.alpha)
    return IdentificationResult(predicted=_argmin_speaker(scores),
                                scores=scores, scheme="linear_combined")


def identify_neural_only(feat: SentenceFeatures, models: list[SpeakerModel],
                         spec: SchemeSpec, counter: EvalCounter | None = None
                         ) -> IdentificationResult:
    models = _check_models(models, minimum=1)
    scores = {}
    for m in models:
        cb = m.neural(spec.neural_bits, spec.mlp_iteration)
        scores[m.speaker_id] = _neural_total(feat, cb, counter).total
    return IdentificationResult(predicted=_argmin_speaker(scores),
                                scores=scores, scheme="neural_only")


def _preselect(feat: SentenceFeatures, models: list[SpeakerModel],
               spec: SchemeSpec) -> tuple[list[SpeakerModel], dict[str, float]]:
    if spec.k > len(models):
        raise ValueError(f"k={spec.k} exceeds the {len(models)} enrolled speakers")
    pres = {m.speaker_id: _linear_total(feat, m, MeasureKind.MSE_LPCC,
                                        spec.linear_bits).total
            for m in models}
    order = sorted(pres, key=lambda s: (pres[s], s))
    shortlist = set(order[: spec.k])
    return [m for m in models if m.speaker_id in shortlist], pres


def identify_preselect_neural(feat: SentenceFeatures, models: list[SpeakerModel],
                              spec: SchemeSpec,
                              counter: EvalCounter | None = None
                              ) -> IdentificationResult:
    models = _check_models(models)
    shortlist, pres = _preselect(feat, models, spec)
    scores = {}
    for m in shortlist:
        cb = m.neural(spec.neural_bits, spec.mlp_iteration)
        scores[m.speaker_id] = _neural_total(feat, cb, counter).total
    return IdentificationResult(predicted=_argmin_speaker(scores),
                                scores=scores, scheme="preselect_neural",
                                preselection=pres)


def identify_preselect_combined(feat: SentenceFeatures, models: list[SpeakerModel],
                                spec: SchemeSpec,
                                counter: EvalCounter | None = None
                                ) -> IdentificationResult:
    models = _check_models(models)
    shortlist, pres = _preselect(feat, models, spec)
    scores = {}
    for m in shortlist:
        cb = m.neural(spec.neural_bits, spec.mlp_iteration)
        s_res = _neural_total(feat, cb, counter)
        lpcc_total = pres[m.speaker_id]
        scores[m.speaker_id] = lpcc_total + spec.alpha * s_res.total
    return IdentificationResult(predicted=_argmin_speaker(scores),
                                scores=scores, scheme="preselect_combined",
                                preselection=pres)


def identify(feat: SentenceFeatures, models: list[SpeakerModel], spec: SchemeSpec,
             counter: EvalCounter | None = None) -> IdentificationResult:
    if spec.scheme == "linear_only":
        return identify_linear(feat, models, spec.measure, spec.linear_bits)
    if spec.scheme == "linear_combined":
        return identify_linear_combined(feat, models, spec)
    if spec.scheme == "neural_only":
        return identify_neural_only(feat, models, spec, counter)
    if spec.scheme == "preselect_neural":
        return identify_preselect_neural(feat, models, spec, counter)
    if spec.scheme == "preselect_combined":
        return identify_preselect_combined(feat, models, spec, counter)
    raise ValueError(f"unknown scheme {spec.scheme!r}")


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def pool_speaker_frames(utterances: list[Utterance], cfg: FrontendConfig
                        ) -> tuple[list[AnalysisFrame], np.ndarray, np.ndarray]:
    """All analysis frames of one speaker's sentences, with LPCC/LPC matrices."""
    speakers = {u.speaker_id for u in utterances}
    if len(speakers) != 1:
        raise ValueError(f"expected one speaker, got {sorted(speakers)}")
    frames: list[AnalysisFrame] = []
    for utt in utterances:
        frames.extend(frames_from_utterance(utt, cfg))
    lpccs, lpcs = analyze_frames(frames, cfg)
    return frames, lpccs, lpcs


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def train_speaker(utterances: list[Utterance], cfg: FrontendConfig,
                  bits_list: list[int], split_method: str = "hyperplane",
                  neural_bits: list[int] | tuple[int, ...] = (),
                  neural_iterations: list[int] | tuple[int, ...] = (0,),
                  seed: int = 0, neural_epochs: int = 8,
                  neural_starts: int = 5) -> SpeakerModel:
    """Train one speaker's codebooks from their training sentences."""
    if not utterances:
        raise ValueError("no training utterances")
    for nb in neural_bits:
        if nb not in bits_list:
            raise ValueError(
                f"neural codebook size {nb} needs a linear codebook of the "
                f"same size (configured sizes: {sorted(bits_list)})")
    speaker = utterances[0].speaker_id
    key = speaker_key(speaker)
    frames, lpccs, lpcs = pool_speaker_frames(utterances, cfg)

    linear = {}
    for bits in bits_list:
        linear[bits] = train_codebook(lpccs, lpcs, bits, method=split_method,
                                      seed=_derived_seed(seed, key, bits))

    neural: dict[tuple[int, int], NeuralCodebook] = {}
    iterations = sorted(set(neural_iterations))
    for nb in neural_bits:
        books = build_neural_codebooks(frames, lpccs, linear[nb], iterations,
                                       seed=seed, speaker=speaker,
                                       epochs=neural_epochs,
                                       n_random=neural_starts - 1)
        for it, cb in books.items():
            neural[(nb, it)] = cb

    config = {
        "frontend": {
            "preemphasis_mu": cfg.preemphasis_mu,
            "frame_len": cfg.frame_len,
            "hop": cfg.hop,
            "lpc_order": cfg.lpc_order,
            "cepstral_order": cfg.cepstral_order,
            "window_before_residual": cfg.window_before_residual,
        },
        "split_method": split_method,
        "bits": sorted(bits_list),
        "neural_bits": sorted(neural_bits),
        "neural_iterations": iterations if neural_bits else [],
        "neural_epochs": neural_epochs,
        "neural_starts": neural_starts,
    }
    return SpeakerModel(speaker_id=speaker, linear_codebooks=linear,
                        neural_codebooks=neural, config=config, seed=seed)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvaluationReport:
    spec: SchemeSpec
    speakers: list[str]
    error_rate: float
    n_errors: int
    n_sentences: int
    confusion: np.ndarray
    rows: list[dict]
    net_frame_evals: int = 0

    def to_json_dict(self) -> dict:
        return {
            "scheme": {
                "scheme": self.spec.scheme,
                "measure": int(self.spec.measure),
                "residual_measure": int(self.spec.residual_measure),
                "k": self.spec.k,
                "alpha": self.spec.alpha,
                "linear_bits": self.spec.linear_bits,
                "mlp_bits": self.spec.neural_bits,
                "mlp_iteration": self.spec.mlp_iteration,
            },
            "speakers": self.speakers,
            "error_rate_percent": self.error_rate,
            "n_errors": self.n_errors,
            "n_sentences": self.n_sentences,
            "confusion": self.confusion.tolist(),
            "net_frame_evals": self.net_frame_evals,
        }


def evaluate(test_features: list[SentenceFeatures], models: list[SpeakerModel],
             spec: SchemeSpec) -> EvaluationReport:
    """Closed-set identification error over a test set."""
    if not test_features:
        raise ValueError("empty test set")
    models = _check_models(models, minimum=1)
    speakers = [m.speaker_id for m in models]
    index = {s: i for i, s in enumerate(speakers)}
    for feat in test_features:
        if feat.speaker_id not in index:
            raise ValueError(f"no model for test speaker {feat.speaker_id}")

    counter = EvalCounter()
    confusion = np.zeros((len(speakers), len(speakers)), dtype=int)
    rows = []
    errors = 0
    for feat in test_features:
        result = identify(feat, models, spec, counter)
        confusion[index[feat.speaker_id], index[result.predicted]] += 1
        wrong = result.predicted != feat.speaker_id
        errors += int(wrong)
        rows.append({
            "sentence": feat.sentence_id,
            "speaker": feat.speaker_id,
            "predicted": result.predicted,
            "correct": not wrong,
            "scores": dict(sorted(result.scores.items())),
        })
    rate = 100.0 * errors / len(test_features)
    return EvaluationReport(spec=spec, speakers=speakers, error_rate=rate,
                            n_errors=errors, n_sentences=len(test_features),
                            confusion=confusion, rows=rows,
                            net_frame_evals=counter.net_frame_evals)


def measure_score_table(test_features: list[SentenceFeatures],
                        models: list[SpeakerModel], bits: int
                        ) -> list[dict]:
    """Mean sentence scores for all six measures, per (sentence, speaker) pair."""
    models = _check_models(models, minimum=1)
    rows = []
    for feat in test_features:
        for m in models:
            entry = {
                "sentence": feat.sentence_id,
                "true_speaker": feat.speaker_id,
                "model_speaker": m.speaker_id,
            }
            for kind in MeasureKind:
                score = _linear_total(feat, m, kind, bits)
                entry[f"m{int(kind)}"] = score.mean
            rows.append(entry)
    return rows


def combined_score_rows(features: list[SentenceFeatures],
                        models: list[SpeakerModel], spec: SchemeSpec,
                        neural: bool = True,
                        k_shortlist: int | None = None) -> list[CombinedScoreRow]:
    """Coefficient + residual totals per sentence, for weight grid search.

    With k_shortlist set, each row keeps only the K speakers with the
    lowest LPCC totals — the population the preselection scheme actually
    decides over.
    """
    models = _check_models(models, minimum=1)
    rows = []
    for feat in features:
        if k_shortlist is not None:
            candidates, pres = _preselect(
                feat, models,
                SchemeSpec(scheme=spec.scheme, measure=spec.measure,
                           k=k_shortlist, alpha=0.0,
                           linear_bits=spec.linear_bits, mlp_bits=spec.mlp_bits,
                           mlp_iteration=spec.mlp_iteration))
        else:
            candidates, pres = models, None
        coeff, resid = {}, {}
        for m in candidates:
            if spec.scheme == "preselect_combined" and pres is not None:
                coeff[m.speaker_id] = pres[m.speaker_id]
            else:
                coeff[m.speaker_id] = _linear_total(
                    feat, m, spec.measure, spec.linear_bits).total
            if neural:
                cb = m.neural(spec.neural_bits, spec.mlp_iteration)
                resid[m.speaker_id] = _neural_total(feat, cb, None).total
            else:
                resid[m.speaker_id] = _linear_total(
                    feat, m, spec.residual_measure, spec.linear_bits).total
        rows.append(CombinedScoreRow(sentence=feat.sentence_id,
                                     true_speaker=feat.speaker_id,
                                     coeff=coeff, residual=resid))
    return rows


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def _codebook_to_dict(cb: LinearCodebook) -> dict:
    return {
        "bits": cb.bits,
        "codewords": [{
            "lpcc": cw.lpcc.tolist(),
            "lpc": cw.lpc_mean.tolist(),
            "population": cw.population,
        } for cw in cb.codewords],
    }


def _neural_to_dict(cb: NeuralCodebook) -> dict:
    return {
        "bits": cb.bits,
        "source_bits": cb.source_bits,
        "lloyd_iteration": cb.lloyd_iteration,
        "nets": [{
            "W1": net.W1.ravel().tolist(),
            "b1": net.b1.tolist(),
            "W2": net.W2.ravel().tolist(),
            "b2": net.b2.tolist(),
            "W3": net.W3.ravel().tolist(),
            "b3": net.b3.tolist(),
        } for net in cb.predictors],
    }


def save_speaker_model(model: SpeakerModel, path: str | Path) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "speaker": model.speaker_id,
        "config": model.config,
        "linear_codebooks": [
            _codebook_to_dict(model.linear_codebooks[b])
            for b in sorted(model.linear_codebooks)],
        "neural_codebooks": [
            _neural_to_dict(model.neural_codebooks[key])
            for key in sorted(model.neural_codebooks)],
        "seed": model.seed,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_speaker_model(path: str | Path) -> SpeakerModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported model schema "
                         f"{doc.get('schema_version')!r}")
    linear = {}
    for cb in doc["linear_codebooks"]:
        codewords = [Codeword(lpcc=np.array(cw["lpcc"], dtype=np.float64),
                              lpc_mean=np.array(cw["lpc"], dtype=np.float64),
                              population=int(cw["population"]))
                     for cw in cb["codewords"]]
        linear[cb["bits"]] = LinearCodebook(bits=cb["bits"], codewords=codewords,
                                            training_distortion=float("nan"))
    neural = {}
    for cb in doc["neural_codebooks"]:
        nets = [MlpPredictor(W1=np.array(n["W1"]).reshape(4, 10),
                             b1=np.array(n["b1"], dtype=np.float64),
                             W2=np.array(n["W2"]).reshape(2, 4),
                             b2=np.array(n["b2"], dtype=np.float64),
                             W3=np.array(n["W3"]).reshape(1, 2),
                             b3=np.array(n["b3"], dtype=np.float64))
                for n in cb["nets"]]
        book = NeuralCodebook(bits=cb["bits"], predictors=nets,
                              source_bits=cb["source_bits"],
                              lloyd_iteration=cb["lloyd_iteration"])
        neural[(cb["bits"], cb["lloyd_iteration"])] = book
    return SpeakerModel(speaker_id=doc["speaker"], linear_codebooks=linear,
                        neural_codebooks=neural, config=doc.get("config", {}),
                        seed=doc.get("seed", 0))

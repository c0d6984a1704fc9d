"""Command-line entry points.

Subcommands: synth-corpus, train, evaluate, export-stats.  A JSON config
drives train/evaluate/export-stats; individual fields can be overridden
with flags.  Exit codes: 0 success, 2 configuration/usage error, 3
corpus or file error, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .corpus import CorpusError, CorpusManifest, generate_synthetic_corpus, load_utterance
from .measures import MeasureKind, grid_search_alpha
from .recognition import (SchemeSpec, combined_score_rows, compute_features,
                          evaluate, load_speaker_model, measure_score_table,
                          save_speaker_model, train_speaker)
from .reporting import (write_correlation_csv, write_error_grid,
                        write_histogram_csv, write_json, write_scatter_csvs,
                        write_score_table_csv)

log = logging.getLogger("speakervq")

OUTPUT_DIR_ENV = "SPEAKERVQ_OUT"
_NEURAL_SCHEMES = ("neural_only", "preselect_neural", "preselect_combined")


def _setup_logging(out_dir: Path) -> None:
    log.setLevel(logging.INFO)
    log.handlers.clear()
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(stream)
    out_dir.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(out_dir / "run.log")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(fh)


class _Stage:
    """Logs wall time of one pipeline stage."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        dt = time.perf_counter() - self.t0
        if exc_type is None:
            log.info("stage %s: %.2f s", self.name, dt)
        return False


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "corpus", None):
        cfg.corpus = args.corpus
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        cfg.output_dir = env_out
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "bits", None):
        cfg.bits = [int(b) for b in args.bits.split(",")]
    if getattr(args, "scheme", None):
        cfg.schemes = [args.scheme]
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if getattr(args, "alpha", None) is not None:
        cfg.alpha = "auto" if args.alpha == "auto" else float(args.alpha)
    cfg.validate()
    return cfg


def _models_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    return Path(override) if override else Path(cfg.output_dir) / "models"


def _load_train_utterances(manifest: CorpusManifest) -> dict[str, list]:
    by_speaker: dict[str, list] = {}
    for entry in manifest.select("train"):
        utt = load_utterance(manifest.resolve(entry), entry)
        by_speaker.setdefault(entry.speaker, []).append(utt)
    return by_speaker


def cmd_train(cfg: ExperimentConfig, models_dir: str | None = None) -> dict:
    """Train one model file per speaker; removes partial output on failure."""
    cfg.validate()
    manifest = CorpusManifest.load(cfg.corpus)
    manifest.validate(for_evaluation=False)
    out = _models_dir(cfg, models_dir)
    out.mkdir(parents=True, exist_ok=True)

    written: list[Path] = []
    try:
        with _Stage("load-train-audio"):
            by_speaker = _load_train_utterances(manifest)
        if not by_speaker:
            raise CorpusError(f"manifest {cfg.corpus} has no train entries")
        model_paths = []
        for speaker in sorted(by_speaker):
            with _Stage(f"train-{speaker}"):
                model = train_speaker(
                    by_speaker[speaker], cfg.frontend, cfg.bits,
                    split_method=cfg.split_method, neural_bits=cfg.neural_bits,
                    neural_iterations=cfg.neural_iterations, seed=cfg.seed,
                    neural_epochs=cfg.neural_epochs,
                    neural_starts=cfg.neural_starts)
            path = out / f"model_{speaker}.json"
            save_speaker_model(model, path)
            written.append(path)
            model_paths.append(str(path))
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return {"models": model_paths}


def _load_models(cfg: ExperimentConfig, manifest: CorpusManifest,
                 models_dir: str | None = None) -> list:
    out = _models_dir(cfg, models_dir)
    models = []
    for speaker in manifest.speakers:
        path = out / f"model_{speaker}.json"
        if not path.exists():
            raise CorpusError(f"missing model file {path}")
        model = load_speaker_model(path)
        for b in cfg.bits:
            model.linear(b)  # raises if the configured size is absent
        models.append(model)
    return models


def _resolve_alpha(cfg: ExperimentConfig, spec: SchemeSpec, train_features,
                   models, neural: bool, cache: dict) -> float:
    if cfg.alpha != "auto":
        return float(cfg.alpha)
    key = (spec.scheme, int(spec.measure), int(spec.residual_measure),
           spec.linear_bits, spec.neural_bits, spec.mlp_iteration, spec.k)
    if key not in cache:
        k_short = spec.k if spec.scheme == "preselect_combined" else None
        rows = combined_score_rows(train_features, models, spec,
                                   neural=neural, k_shortlist=k_short)
        grid = np.asarray(cfg.alpha_grid) if cfg.alpha_grid else None
        cache[key] = grid_search_alpha(rows, grid)
        log.info("alpha grid search %s -> %g", key, cache[key])
    return cache[key]


def cmd_evaluate(cfg: ExperimentConfig, models_dir: str | None = None) -> dict:
    cfg.validate()
    manifest = CorpusManifest.load(cfg.corpus)
    manifest.validate(for_evaluation=True)
    models = _load_models(cfg, manifest, models_dir)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    with _Stage("load-test-audio"):
        test_features = [
            compute_features(load_utterance(manifest.resolve(e), e), cfg.frontend)
            for e in manifest.select("test")]
    needs_alpha_search = (cfg.alpha == "auto"
                          and (cfg.combined_pairs
                               or "preselect_combined" in cfg.schemes))
    train_features = []
    if needs_alpha_search:
        with _Stage("load-train-audio"):
            for e in manifest.select("train"):
                train_features.append(
                    compute_features(load_utterance(manifest.resolve(e), e),
                                     cfg.frontend))

    artifacts = {"reports": [], "csv": []}
    reports = []
    alpha_cache: dict = {}

    with _Stage("evaluate-linear"):
        cells = {}
        cols = [f"m{m}" for m in cfg.measures]
        for bits in cfg.bits:
            for m in cfg.measures:
                spec = SchemeSpec(scheme="linear_only",
                                  measure=MeasureKind(m), linear_bits=bits)
                rep = evaluate(test_features, models, spec)
                cells[(bits, f"m{m}")] = rep.error_rate
                reports.append(rep.to_json_dict())
        artifacts["csv"].append(str(write_error_grid(
            out / "error_measures.csv", "bits", cfg.bits, cols, cells)))

    if cfg.combined_pairs:
        with _Stage("evaluate-linear-combined"):
            cells = {}
            cols = [f"m{cm}+m{rm}" for cm, rm in cfg.combined_pairs]
            for bits in cfg.bits:
                for cm, rm in cfg.combined_pairs:
                    spec = SchemeSpec(scheme="linear_combined",
                                      measure=MeasureKind(cm),
                                      residual_measure=MeasureKind(rm),
                                      linear_bits=bits, alpha=0.0)
                    spec.alpha = _resolve_alpha(cfg, spec, train_features,
                                                models, False, alpha_cache)
                    rep = evaluate(test_features, models, spec)
                    cells[(bits, f"m{cm}+m{rm}")] = rep.error_rate
                    reports.append(rep.to_json_dict())
            artifacts["csv"].append(str(write_error_grid(
                out / "error_combined_linear.csv", "bits", cfg.bits, cols, cells)))

    for scheme in cfg.schemes:
        if scheme not in _NEURAL_SCHEMES:
            continue
        with _Stage(f"evaluate-{scheme}"):
            for iteration in cfg.neural_iterations:
                cells = {}
                row_keys = cfg.bits if scheme != "neural_only" else [0]
                for linear_bits in row_keys:
                    for mlp_bits in cfg.neural_bits:
                        spec = SchemeSpec(
                            scheme=scheme, k=cfg.k, alpha=0.0,
                            linear_bits=(linear_bits if scheme != "neural_only"
                                         else mlp_bits),
                            mlp_bits=mlp_bits, mlp_iteration=iteration)
                        if scheme == "preselect_combined":
                            spec.alpha = _resolve_alpha(
                                cfg, spec, train_features, models, True,
                                alpha_cache)
                        rep = evaluate(test_features, models, spec)
                        cells[(linear_bits, mlp_bits)] = rep.error_rate
                        reports.append(rep.to_json_dict())
                        log.info("net-frame evals %s iter%d lb=%s mb=%d: %d",
                                 scheme, iteration, linear_bits, mlp_bits,
                                 rep.net_frame_evals)
                label = "linear_bits" if scheme != "neural_only" else "-"
                artifacts["csv"].append(str(write_error_grid(
                    out / f"error_{scheme}_iter{iteration}.csv", label,
                    row_keys, cfg.neural_bits, cells)))

    artifacts["reports"].append(str(write_json(out / "reports.json", reports)))

    if cfg.retain_scores:
        with _Stage("score-table"):
            table = measure_score_table(test_features, models,
                                        cfg.effective_stats_bits)
        artifacts["scores"] = str(write_json(out / "scores.json", table))
        artifacts["csv"].append(str(write_score_table_csv(
            out / "score_table.csv", table)))
    return artifacts


def cmd_export_stats(cfg: ExperimentConfig, scores_path: str | None = None) -> dict:
    cfg.validate()
    out = Path(cfg.output_dir)
    path = Path(scores_path) if scores_path else out / "scores.json"
    if not path.exists():
        raise CorpusError(
            f"score table {path} not found; run `speakervq evaluate` with "
            "retain_scores enabled first")
    table = json.loads(path.read_text())
    if not table:
        raise CorpusError(f"score table {path} is empty")
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {"csv": []}
    artifacts["csv"].append(str(write_correlation_csv(out / "correlation.csv", table)))
    artifacts["csv"].append(str(write_histogram_csv(out / "histograms.csv", table)))
    artifacts["csv"].extend(str(p) for p in write_scatter_csvs(out, table))
    return artifacts


def _cmd_synth(args) -> int:
    out = Path(args.out)
    manifest = generate_synthetic_corpus(out, args.speakers, args.seed,
                                         n_train=args.train, n_test=args.test)
    print(out / "manifest.json")
    log.info("wrote %d utterances for %d speakers", len(manifest.entries),
             args.speakers)
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    _setup_logging(Path(cfg.output_dir))
    artifacts = cmd_train(cfg, models_dir=args.models)
    _check_artifacts(artifacts)
    print("\n".join(artifacts["models"]))
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    _setup_logging(Path(cfg.output_dir))
    artifacts = cmd_evaluate(cfg, models_dir=args.models)
    _check_artifacts(artifacts)
    print("\n".join(artifacts["csv"]))
    return 0


def _cmd_export_stats(args) -> int:
    cfg = _load_config(args)
    _setup_logging(Path(cfg.output_dir))
    artifacts = cmd_export_stats(cfg, scores_path=args.scores)
    _check_artifacts(artifacts)
    print("\n".join(artifacts["csv"]))
    return 0


def _check_artifacts(artifacts: dict) -> None:
    for value in artifacts.values():
        paths = value if isinstance(value, list) else [value]
        for p in paths:
            path = Path(p)
            if not path.exists() or path.stat().st_size == 0:
                raise RuntimeError(f"declared artifact {path} missing or empty")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speakervq",
        description="Closed-set speaker identification workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--speakers", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=5)
    p.add_argument("--test", type=int, default=5)
    p.set_defaults(func=_cmd_synth)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--corpus")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--bits")
        p.add_argument("--scheme")
        p.add_argument("--k", type=int)
        p.add_argument("--alpha")
        p.add_argument("--models")

    p = sub.add_parser("train", help="train speaker models")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="run identification and emit error tables")
    common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("export-stats", help="emit correlation/histogram/scatter data")
    common(p)
    p.add_argument("--scores")
    p.set_defaults(func=_cmd_export_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not log.handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except (CorpusError, FileNotFoundError) as exc:
        log.error("corpus error: %s", exc)
        return 3
    except ValueError as exc:
        log.error("invalid arguments: %s", exc)
        return 2
    except Exception:  # pragma: no cover - unexpected
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""CSV/JSON export of evaluation tables and figure data.

Everything is plot-ready text output: error-rate grids, correlation
matrices, intra/inter histograms and per-pair scatter points.  Writers
are deterministic (fixed row order, repr float formatting) so re-runs of
the same experiment produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .measures import HistogramData, MeasureKind, correlation_matrix, distortion_histograms


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_error_grid(path: str | Path, row_label: str, row_keys: list,
                     col_keys: list, cells: dict) -> Path:
    """Error-rate grid: one row per codebook size, one column per condition."""
    header = [row_label] + [str(c) for c in col_keys]
    rows = [[r] + [cells[(r, c)] for c in col_keys] for r in row_keys]
    return write_csv(path, header, rows)


def write_correlation_csv(path: str | Path, table_rows: list[dict]) -> Path:
    """Pearson matrix between the six measure columns of a score table."""
    kinds = [f"m{int(k)}" for k in MeasureKind]
    table = np.array([[row[k] for k in kinds] for row in table_rows])
    corr = correlation_matrix(table)
    rows = [[kinds[i]] + [corr[i, j] for j in range(len(kinds))]
            for i in range(len(kinds))]
    return write_csv(path, ["measure"] + kinds, rows)


def write_histogram_csv(path: str | Path, table_rows: list[dict],
                        n_bins: int = 50) -> Path:
    """Intra/inter-speaker score histograms, one block per measure."""
    out_rows = []
    for kind in MeasureKind:
        key = f"m{int(kind)}"
        triples = [(r["true_speaker"], r["model_speaker"], r[key])
                   for r in table_rows]
        hist: HistogramData = distortion_histograms(triples, n_bins=n_bins)
        for b in range(len(hist.edges) - 1):
            out_rows.append([key, hist.edges[b], hist.edges[b + 1],
                             int(hist.intra_counts[b]), int(hist.inter_counts[b])])
    return write_csv(path, ["measure", "bin_lo", "bin_hi", "intra", "inter"],
                     out_rows)


def write_scatter_csvs(out_dir: str | Path, table_rows: list[dict]) -> list[Path]:
    """One scatter file per unordered measure pair (the dispersion diagrams)."""
    out_dir = Path(out_dir)
    paths = []
    kinds = list(MeasureKind)
    for i, ki in enumerate(kinds):
        for kj in kinds[i + 1:]:
            a, b = f"m{int(ki)}", f"m{int(kj)}"
            rows = [[r["sentence"], r["true_speaker"], r["model_speaker"],
                     r[a], r[b]] for r in table_rows]
            paths.append(write_csv(
                out_dir / f"scatter_{a}_{b}.csv",
                ["sentence", "true_speaker", "model_speaker", a, b], rows))
    return paths


def write_score_table_csv(path: str | Path, table_rows: list[dict]) -> Path:
    kinds = [f"m{int(k)}" for k in MeasureKind]
    rows = [[r["sentence"], r["true_speaker"], r["model_speaker"]]
            + [r[k] for k in kinds] for r in table_rows]
    return write_csv(path, ["sentence", "true_speaker", "model_speaker"] + kinds,
                     rows)


def write_json(path: str | Path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path

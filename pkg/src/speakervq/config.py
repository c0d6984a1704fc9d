"""Experiment configuration: one JSON document drives a whole sweep."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .frontend import FrontendConfig
from .recognition import SCHEME_NAMES


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    corpus: str = "manifest.json"
    output_dir: str = "out"
    seed: int = 0
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    bits: list[int] = field(default_factory=lambda: [4, 5, 6, 7])
    split_method: str = "hyperplane"
    measures: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    combined_pairs: list[list[int]] = field(default_factory=lambda: [[2, 3], [2, 4]])
    schemes: list[str] = field(default_factory=lambda: ["linear_only"])
    k: int = 2
    alpha: float | str = "auto"
    alpha_grid: list[float] | None = None
    neural_bits: list[int] = field(default_factory=list)
    neural_iterations: list[int] = field(default_factory=lambda: [0])
    neural_epochs: int = 8
    neural_starts: int = 5
    stats_bits: int | None = None
    retain_scores: bool = True

    def validate(self) -> None:
        if not self.bits:
            raise ConfigError("bits list is empty")
        for b in self.bits:
            if not 1 <= b <= 10:
                raise ConfigError(f"codebook bits must be in [1, 10], got {b}")
        if self.split_method not in ("hyperplane", "std_deviation"):
            raise ConfigError(f"unknown split method {self.split_method!r}")
        for m in self.measures:
            if m not in (1, 2, 3, 4, 5, 6):
                raise ConfigError(f"measure must be 1-6, got {m}")
        for pair in self.combined_pairs:
            if len(pair) != 2 or pair[0] not in (1, 2) or pair[1] not in (3, 4, 5, 6):
                raise ConfigError(
                    f"combined pair must be (coefficient, residual) measure ids, got {pair}")
        for s in self.schemes:
            if s not in SCHEME_NAMES:
                raise ConfigError(f"unknown scheme {s!r} (choose from {SCHEME_NAMES})")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.alpha != "auto" and (not isinstance(self.alpha, (int, float))
                                     or self.alpha < 0):
            raise ConfigError("alpha must be non-negative or \"auto\"")
        if self.alpha_grid is not None and len(self.alpha_grid) == 0:
            raise ConfigError("alpha_grid must be non-empty when given")
        for nb in self.neural_bits:
            if nb not in self.bits:
                raise ConfigError(
                    f"neural codebook size {nb} requires a linear codebook of the "
                    f"same size in bits={self.bits}")
        if any(i < 0 for i in self.neural_iterations):
            raise ConfigError("neural_iterations must be >= 0")
        if self.neural_epochs < 0:
            raise ConfigError("neural_epochs must be >= 0")
        if self.neural_starts < 1:
            raise ConfigError("neural_starts must be >= 1")
        if self.stats_bits is not None and self.stats_bits not in self.bits:
            raise ConfigError("stats_bits must be one of the configured bits")
        needs_neural = {"neural_only", "preselect_neural", "preselect_combined"}
        if needs_neural & set(self.schemes) and not self.neural_bits:
            raise ConfigError("neural schemes configured but neural_bits is empty")

    @property
    def effective_stats_bits(self) -> int:
        return self.stats_bits if self.stats_bits is not None else max(self.bits)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frontend"] = asdict(self.frontend)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "frontend" in d and isinstance(d["frontend"], dict):
            try:
                d["frontend"] = FrontendConfig(**d["frontend"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad frontend settings: {exc}") from exc
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

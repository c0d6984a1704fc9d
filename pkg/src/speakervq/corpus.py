"""Corpus ingestion and synthesis.

Audio enters the system as labeled utterances at 8 kHz.  Two container
formats are accepted: RIFF WAV (16-bit PCM mono) and headerless raw
16-bit little-endian PCM with the rate declared in the manifest.  16 kHz
input is decimated 2:1 behind an anti-alias FIR; no gain normalization is
applied beyond the PCM scaling.

A synthetic corpus generator is included so the evaluation harness can
run without any licensed speech data: each synthetic speaker is a fixed
stable order-10 all-pole filter excited by a noise/pulse-train mix.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import firwin, lfilter

TARGET_RATE = 8000
PCM_SCALE = 32768.0
MIN_DURATION_S = 0.5
MAX_DURATION_S = 10.0

# Anti-alias design: linear-phase windowed-sinc, passband edge below the
# output Nyquist so the stopband (>= 50 dB for a 127-tap Hamming design)
# starts before 4 kHz.
ANTIALIAS_TAPS = 127
ANTIALIAS_CUTOFF_HZ = 3600.0


class CorpusError(Exception):
    """Unreadable, malformed or out-of-contract audio / manifest input."""


@dataclass(frozen=True)
class Utterance:
    """One spoken sentence: immutable samples in [-1, 1] at 8 kHz."""

    speaker_id: str
    sentence_id: str
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        if self.sample_rate != TARGET_RATE:
            raise CorpusError(
                f"utterance rate must be {TARGET_RATE} Hz, got {self.sample_rate}"
            )
        dur = self.duration
        if not (MIN_DURATION_S <= dur <= MAX_DURATION_S):
            raise CorpusError(
                f"{self.speaker_id}/{self.sentence_id}: duration {dur:.3f}s "
                f"outside [{MIN_DURATION_S}, {MAX_DURATION_S}]s"
            )
        peak = float(np.max(np.abs(samples))) if samples.size else 0.0
        if peak > 1.0:
            raise CorpusError(
                f"{self.speaker_id}/{self.sentence_id}: samples exceed [-1, 1]"
            )

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    speaker: str
    sentence: str
    role: str
    rate: int | None = None  # required for headerless raw PCM only

    def __post_init__(self):
        if self.role not in ("train", "test"):
            raise CorpusError(f"manifest role must be train|test, got {self.role!r}")


@dataclass
class CorpusManifest:
    """List of (path, speaker, sentence, role) records plus a base directory."""

    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def validate(self, for_evaluation: bool = True) -> None:
        seen = set()
        for e in self.entries:
            key = (e.speaker, e.sentence)
            if key in seen:
                raise CorpusError(f"duplicate (speaker, sentence) pair {key}")
            seen.add(key)
        if for_evaluation:
            trained = {e.speaker for e in self.entries if e.role == "train"}
            tested = {e.speaker for e in self.entries if e.role == "test"}
            missing = trained.symmetric_difference(tested)
            if missing:
                raise CorpusError(
                    "evaluation corpus needs every speaker in both roles; "
                    f"one-sided speakers: {sorted(missing)}"
                )

    @property
    def speakers(self) -> list[str]:
        return sorted({e.speaker for e in self.entries})

    def select(self, role: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.role == role]

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    @classmethod
    def load(cls, path: str | Path) -> "CorpusManifest":
        path = Path(path)
        try:
            records = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(records, list):
            raise CorpusError(f"manifest {path} must be a JSON list of records")
        entries = []
        for i, rec in enumerate(records):
            try:
                entries.append(
                    ManifestEntry(
                        path=rec["path"],
                        speaker=rec["speaker"],
                        sentence=rec["sentence"],
                        role=rec["role"],
                        rate=rec.get("rate"),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise CorpusError(f"manifest {path} record {i} malformed: {exc}") from exc
        return cls(entries=entries, root=path.parent)

    def save(self, path: str | Path) -> None:
        records = []
        for e in self.entries:
            rec = {"path": e.path, "speaker": e.speaker,
                   "sentence": e.sentence, "role": e.role}
            if e.rate is not None:
                rec["rate"] = e.rate
            records.append(rec)
        Path(path).write_text(json.dumps(records, indent=1) + "\n")


def _read_wav(path: Path) -> tuple[np.ndarray, int]:
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise CorpusError(f"{path}: stereo input not supported")
            if wf.getsampwidth() != 2:
                raise CorpusError(f"{path}: only 16-bit PCM supported")
            if wf.getcomptype() != "NONE":
                raise CorpusError(f"{path}: compressed WAV not supported")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise CorpusError(f"{path}: unreadable WAV ({exc})") from exc
    return np.frombuffer(raw, dtype="<i2"), rate


def _read_raw_pcm(path: Path, rate: int | None) -> tuple[np.ndarray, int]:
    if rate is None:
        raise CorpusError(f"{path}: raw PCM requires a rate in the manifest")
    try:
        data = np.fromfile(path, dtype="<i2")
    except OSError as exc:
        raise CorpusError(f"{path}: unreadable ({exc})") from exc
    return data, rate


def load_utterance(path: str | Path, entry: ManifestEntry) -> Utterance:
    """Load one manifest entry into a normalized 8 kHz utterance.

    WAV is detected from the RIFF magic; everything else is treated as
    headerless raw PCM.  16 kHz input is decimated; other rates are
    rejected.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise CorpusError(f"{path}: cannot open ({exc})") from exc

    if magic == b"RIFF":
        pcm, rate = _read_wav(path)
    else:
        pcm, rate = _read_raw_pcm(path, entry.rate)

    if rate not in (8000, 16000):
        raise CorpusError(f"{path}: sample rate {rate} not in (8000, 16000)")

    x = pcm.astype(np.float64) / PCM_SCALE
    if rate == 16000:
        x = resample_2to1(x)
    return Utterance(
        speaker_id=entry.speaker,
        sentence_id=entry.sentence,
        sample_rate=TARGET_RATE,
        samples=x,
    )


@lru_cache(maxsize=1)
def antialias_filter() -> np.ndarray:
    h = firwin(ANTIALIAS_TAPS, ANTIALIAS_CUTOFF_HZ, window="hamming", fs=16000.0)
    h.flags.writeable = False
    return h


def resample_2to1(x: np.ndarray) -> np.ndarray:
    """Decimate a 16 kHz sequence to 8 kHz behind the anti-alias FIR."""
    x = np.asarray(x, dtype=np.float64)
    h = antialias_filter()
    if len(x) < len(h):
        raise CorpusError(
            f"input length {len(x)} shorter than anti-alias filter ({len(h)} taps)"
        )
    delay = (len(h) - 1) // 2
    filtered = np.convolve(x, h)[delay:delay + len(x)]
    return filtered[::2][: len(x) // 2]


def load_corpus(manifest: CorpusManifest, role: str | None = None) -> list[Utterance]:
    entries = manifest.entries if role is None else manifest.select(role)
    return [load_utterance(manifest.resolve(e), e) for e in entries]


# ---------------------------------------------------------------------------
# Synthetic speakers
# ---------------------------------------------------------------------------

_SYNTH_POLE_SLOTS = 5          # conjugate pairs -> order 10
_SYNTH_F0_RANGE = (90.0, 240.0)


def _speaker_voice(rng: np.random.Generator) -> tuple[np.ndarray, int, float]:
    """Draw one speaker: all-pole filter denominator, pulse period, mix."""
    slots = np.linspace(0.08, 0.82, _SYNTH_POLE_SLOTS) * np.pi
    width = (slots[1] - slots[0])
    angles = slots + rng.uniform(-0.42, 0.42, _SYNTH_POLE_SLOTS) * width
    radii = rng.uniform(0.78, 0.95, _SYNTH_POLE_SLOTS)
    poles = radii * np.exp(1j * angles)
    denom = np.real(np.poly(np.concatenate([poles, np.conj(poles)])))
    f0 = rng.uniform(*_SYNTH_F0_RANGE)
    period = int(round(TARGET_RATE / f0))
    mix = rng.uniform(0.35, 0.65)
    return denom, period, mix


def _synth_sentence(rng: np.random.Generator, denom: np.ndarray,
                    period: int, mix: float) -> np.ndarray:
    n = int(rng.uniform(1.0, 2.0) * TARGET_RATE)
    noise = rng.standard_normal(n)
    pulses = np.zeros(n)
    phase = int(rng.integers(period))
    pulses[phase::period] = np.sqrt(period)
    excitation = (1.0 - mix) * noise + mix * pulses
    x = lfilter([1.0], denom, excitation)
    peak = rng.uniform(0.35, 0.7)
    return x * (peak / np.max(np.abs(x)))


def write_wav(path: str | Path, samples: np.ndarray, rate: int = TARGET_RATE) -> None:
    pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())


def generate_synthetic_corpus(out_dir: str | Path, n_speakers: int, seed: int,
                              n_train: int = 5, n_test: int = 5) -> CorpusManifest:
    """Write a deterministic synthetic corpus and its manifest under out_dir.

    Each speaker keeps one fixed vocal-tract filter across sentences;
    sentence-to-sentence variation comes from the excitation draw.
    """
    if n_speakers < 2:
        raise ValueError("need at least 2 speakers")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for si in range(n_speakers):
        speaker = f"spk{si:02d}"
        voice_rng = np.random.default_rng(np.random.SeedSequence([seed, 101, si]))
        denom, period, mix = _speaker_voice(voice_rng)
        for sj in range(n_train + n_test):
            sent_rng = np.random.default_rng(np.random.SeedSequence([seed, 202, si, sj]))
            x = _synth_sentence(sent_rng, denom, period, mix)
            name = f"{speaker}_s{sj}.wav"
            write_wav(out_dir / name, x)
            entries.append(ManifestEntry(
                path=name,
                speaker=speaker,
                sentence=f"s{sj}",
                role="train" if sj < n_train else "test",
            ))
    manifest = CorpusManifest(entries=entries, root=out_dir)
    manifest.save(out_dir / "manifest.json")
    return manifest

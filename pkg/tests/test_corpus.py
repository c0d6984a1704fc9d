import json
import wave

import numpy as np
import pytest
from scipy.signal import freqz

from speakervq.corpus import (CorpusError, CorpusManifest, ManifestEntry,
                              antialias_filter, generate_synthetic_corpus,
                              load_utterance, resample_2to1, write_wav)


def _write_pcm_wav(path, pcm, rate=8000, channels=1):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(pcm, dtype="<i2").tobytes())


def _entry(role="train", rate=None):
    return ManifestEntry(path="x.wav", speaker="a", sentence="s0", role=role,
                         rate=rate)


class TestLoadUtterance:
    def test_pcm_scaling(self, tmp_path):
        pcm = np.zeros(8000, dtype=np.int16)
        pcm[0], pcm[1], pcm[2] = 16384, 0, -32768
        path = tmp_path / "x.wav"
        _write_pcm_wav(path, pcm)
        utt = load_utterance(path, _entry())
        assert utt.samples[0] == 0.5
        assert utt.samples[1] == 0.0
        assert utt.samples[2] == -1.0
        assert utt.sample_rate == 8000

    def test_idempotent(self, tmp_path):
        rng = np.random.default_rng(0)
        pcm = (rng.uniform(-0.5, 0.5, 8000) * 32767).astype(np.int16)
        path = tmp_path / "x.wav"
        _write_pcm_wav(path, pcm)
        a = load_utterance(path, _entry())
        b = load_utterance(path, _entry())
        assert np.array_equal(a.samples, b.samples)

    def test_16k_input_is_decimated(self, tmp_path):
        pcm = (np.full(16000, 0.25) * 32767).astype(np.int16)
        path = tmp_path / "x.wav"
        _write_pcm_wav(path, pcm, rate=16000)
        utt = load_utterance(path, _entry())
        assert len(utt.samples) == 8000
        assert abs(utt.samples[4000] - 0.25) < 1e-3

    def test_stereo_rejected(self, tmp_path):
        pcm = np.zeros(16000, dtype=np.int16)
        path = tmp_path / "x.wav"
        _write_pcm_wav(path, pcm, rate=8000, channels=2)
        with pytest.raises(CorpusError, match="stereo"):
            load_utterance(path, _entry())

    def test_unsupported_rate(self, tmp_path):
        pcm = np.zeros(44100, dtype=np.int16)
        path = tmp_path / "x.wav"
        _write_pcm_wav(path, pcm, rate=44100)
        with pytest.raises(CorpusError, match="sample rate"):
            load_utterance(path, _entry())

    def test_unreadable(self, tmp_path):
        with pytest.raises(CorpusError):
            load_utterance(tmp_path / "nope.wav", _entry())

    def test_raw_pcm_needs_rate(self, tmp_path):
        pcm = np.zeros(8000, dtype="<i2")
        path = tmp_path / "x.raw"
        pcm.tofile(path)
        with pytest.raises(CorpusError, match="rate"):
            load_utterance(path, _entry(rate=None))
        utt = load_utterance(path, _entry(rate=8000))
        assert len(utt.samples) == 8000

    def test_duration_bounds(self, tmp_path):
        pcm = np.zeros(1000, dtype=np.int16)  # 0.125 s, too short
        path = tmp_path / "x.wav"
        _write_pcm_wav(path, pcm)
        with pytest.raises(CorpusError, match="duration"):
            load_utterance(path, _entry())


class TestResample:
    def test_dc_preserved(self):
        y = resample_2to1(np.full(2000, 0.3))
        assert len(y) == 1000
        interior = y[40:-40]
        assert np.max(np.abs(interior - 0.3)) < 1e-3

    def test_above_nyquist_rejected(self):
        t = np.arange(4000)
        x = np.sin(2 * np.pi * 6000.0 * t / 16000.0)
        y = resample_2to1(x)
        assert np.sqrt(np.mean(y ** 2)) < 0.01 * np.sqrt(np.mean(x ** 2))

    def test_zeros(self):
        assert np.array_equal(resample_2to1(np.zeros(500)), np.zeros(250))

    def test_too_short(self):
        with pytest.raises(CorpusError, match="shorter"):
            resample_2to1(np.zeros(10))

    def test_output_length_floor(self):
        assert len(resample_2to1(np.zeros(2001))) == 1000

    def test_filter_design_spec(self):
        # >= 40 dB everywhere above 4 kHz, unity at DC
        h = antialias_filter()
        assert len(h) >= 63
        w, resp = freqz(h, worN=8192, fs=16000)
        stop = np.abs(resp)[w >= 4000]
        assert 20 * np.log10(stop.max()) < -40
        assert abs(np.sum(h) - 1.0) < 1e-12


class TestSyntheticCorpus:
    def test_deterministic(self, tmp_path):
        m1 = generate_synthetic_corpus(tmp_path / "a", 2, seed=1)
        m2 = generate_synthetic_corpus(tmp_path / "b", 2, seed=1)
        for e1, e2 in zip(m1.entries, m2.entries):
            b1 = (m1.root / e1.path).read_bytes()
            b2 = (m2.root / e2.path).read_bytes()
            assert b1 == b2

    def test_counts(self, tmp_path):
        m = generate_synthetic_corpus(tmp_path / "c", 10, seed=7)
        assert len(m.entries) == 100
        assert len(m.select("train")) == 50
        assert len(m.select("test")) == 50
        m.validate(for_evaluation=True)

    def test_sample_range(self, small_manifest, small_train_utts):
        for utt in small_train_utts:
            assert np.max(np.abs(utt.samples)) <= 1.0

    def test_needs_two_speakers(self, tmp_path):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(tmp_path / "d", 1, seed=0)


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = [ManifestEntry("a.wav", "spk0", "s0", "train"),
                   ManifestEntry("b.raw", "spk0", "s1", "test", rate=8000)]
        m = CorpusManifest(entries=entries, root=tmp_path)
        m.save(tmp_path / "m.json")
        m2 = CorpusManifest.load(tmp_path / "m.json")
        assert m2.entries == entries
        assert m2.root == tmp_path

    def test_fixed_field_names(self, tmp_path):
        m = CorpusManifest([ManifestEntry("a.wav", "spk0", "s0", "train")])
        m.save(tmp_path / "m.json")
        records = json.loads((tmp_path / "m.json").read_text())
        assert records == [{"path": "a.wav", "speaker": "spk0",
                            "sentence": "s0", "role": "train"}]

    def test_duplicate_pair_rejected(self):
        m = CorpusManifest([ManifestEntry("a.wav", "x", "s0", "train"),
                            ManifestEntry("b.wav", "x", "s0", "test")])
        with pytest.raises(CorpusError, match="duplicate"):
            m.validate()

    def test_one_sided_speaker_rejected(self):
        m = CorpusManifest([ManifestEntry("a.wav", "x", "s0", "train"),
                            ManifestEntry("b.wav", "y", "s0", "train"),
                            ManifestEntry("c.wav", "x", "s1", "test")])
        with pytest.raises(CorpusError, match="both roles"):
            m.validate(for_evaluation=True)
        m.validate(for_evaluation=False)

    def test_bad_role(self):
        with pytest.raises(CorpusError, match="role"):
            ManifestEntry("a.wav", "x", "s0", "dev")


def test_write_wav_round_trip(tmp_path):
    x = np.linspace(-0.9, 0.9, 8000)
    path = tmp_path / "x.wav"
    write_wav(path, x)
    utt = load_utterance(path, _entry())
    assert np.max(np.abs(utt.samples - x)) < 1.0 / 32000

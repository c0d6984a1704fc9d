import numpy as np
import pytest

from speakervq.frontend import (AnalysisFrame, FrontendConfig, deemphasize,
                                frame_signal, frames_from_utterance,
                                hamming_coefficients, hamming_window,
                                preemphasize)


class TestPreemphasis:
    def test_constant_input(self):
        np.testing.assert_allclose(preemphasize([1, 1, 1], 0.95),
                                   [1.0, 0.05, 0.05])

    def test_impulse(self):
        np.testing.assert_allclose(preemphasize([1, 0, 0], 0.95),
                                   [1.0, -0.95, 0.0])

    def test_mu_zero_identity(self, rng):
        x = rng.standard_normal(100)
        assert np.array_equal(preemphasize(x, 0.0), x)

    def test_invertible(self, rng):
        x = rng.uniform(-1, 1, 500)
        y = preemphasize(x, 0.95)
        np.testing.assert_allclose(deemphasize(y, 0.95), x, atol=1e-12)


class TestFraming:
    def test_counts_and_offsets(self):
        cfg = FrontendConfig()
        y = np.arange(400, dtype=float)
        frames = frame_signal(y, cfg)
        assert len(frames) == 3
        for i, f in enumerate(frames):
            assert f.frame_index == i
            np.testing.assert_array_equal(f.samples, y[i * 80: i * 80 + 240])

    def test_single_frame_zero_history(self):
        cfg = FrontendConfig()
        frames = frame_signal(np.ones(240), cfg)
        assert len(frames) == 1
        np.testing.assert_array_equal(frames[0].history, np.zeros(10))

    def test_too_short(self):
        with pytest.raises(ValueError, match="shorter"):
            frame_signal(np.ones(239), FrontendConfig())

    def test_history_matches_signal(self, rng):
        cfg = FrontendConfig()
        y = rng.standard_normal(1000)
        frames = frame_signal(y, cfg)
        for f in frames[1:]:
            start = f.frame_index * cfg.hop
            np.testing.assert_array_equal(f.history, y[start - 10:start])

    def test_gap_free_cover(self, rng):
        cfg = FrontendConfig()
        y = rng.standard_normal(1200)
        frames = frame_signal(y, cfg)
        starts = [f.frame_index * cfg.hop for f in frames]
        assert all(b - a == cfg.hop for a, b in zip(starts, starts[1:]))

    def test_energy_nonnegative(self, rng):
        frames = frame_signal(rng.standard_normal(600), FrontendConfig())
        assert all(f.energy >= 0 for f in frames)


class TestHammingWindow:
    def test_all_ones_gives_window(self):
        out = hamming_window(np.ones(240))
        np.testing.assert_allclose(out, hamming_coefficients(240))
        assert abs(out[0] - 0.08) < 1e-12

    def test_formula_peak(self):
        # continuous formula peaks at 1.0 at n = (N-1)/2
        n_mid = (240 - 1) / 2
        w_mid = 0.54 - 0.46 * np.cos(2 * np.pi * n_mid / 239)
        assert w_mid == 1.0
        assert np.max(hamming_coefficients(240)) > 0.9999

    def test_zeros(self):
        assert np.array_equal(hamming_window(np.zeros(240)), np.zeros(240))

    def test_wrong_length(self):
        with pytest.raises(ValueError, match="expected"):
            hamming_window(np.ones(239))


class TestConfig:
    def test_defaults_match_two_thirds_overlap(self):
        cfg = FrontendConfig()
        assert cfg.hop == cfg.frame_len // 3

    @pytest.mark.parametrize("kwargs", [
        {"preemphasis_mu": 1.0},
        {"preemphasis_mu": -0.1},
        {"lpc_order": 0},
        {"lpc_order": 300},
        {"hop": 0},
        {"cepstral_order": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FrontendConfig(**kwargs)


def test_frames_from_utterance(small_train_utts, cfg):
    utt = small_train_utts[0]
    frames = frames_from_utterance(utt, cfg)
    expected = (len(utt.samples) - cfg.frame_len) // cfg.hop + 1
    assert len(frames) == expected
    y = preemphasize(utt.samples, cfg.preemphasis_mu)
    np.testing.assert_array_equal(frames[0].samples, y[:240])

import numpy as np
import pytest
from scipy.linalg import toeplitz

from speakervq.frontend import AnalysisFrame, FrontendConfig, hamming_coefficients
from speakervq.lpc import (autocorrelate, cepstrum_fft_oracle,
                           inverse_filter_residual, levinson, lpc_to_cepstrum,
                           prediction_gain_db, reflection_to_lpc)


def toeplitz_solve_oracle(r):
    """Predictor coefficients straight from the normal equations."""
    p = len(r) - 1
    return np.linalg.solve(toeplitz(r[:p]), r[1:p + 1])


def random_stable_lpc(rng, p=10, kmax=0.9):
    return reflection_to_lpc(rng.uniform(-kmax, kmax, p))


def make_frame(samples, history=None, p=10):
    if history is None:
        history = np.zeros(p)
    return AnalysisFrame(samples=np.asarray(samples, dtype=float),
                         history=np.asarray(history, dtype=float),
                         frame_index=0)


class TestAutocorrelate:
    def test_zero_frame(self):
        r = autocorrelate(make_frame(np.zeros(240)), 10)
        assert np.array_equal(r, np.zeros(11))

    def test_unit_impulse(self):
        s = np.zeros(240)
        s[0] = 1.0
        r = autocorrelate(make_frame(s), 10)
        w0 = hamming_coefficients(240)[0]
        assert abs(r[0] - w0 ** 2) < 1e-15
        assert np.all(r[1:] == 0)

    def test_r0_dominates(self, rng):
        for _ in range(20):
            r = autocorrelate(make_frame(rng.standard_normal(240)), 10)
            assert np.all(r[0] >= np.abs(r[1:]) - 1e-12)


class TestLevinson:
    def test_white(self):
        model = levinson(np.array([1.0, 0, 0, 0]))
        assert np.array_equal(model.a, np.zeros(3))
        assert model.error == 1.0
        assert not model.degenerate

    def test_order_one(self):
        model = levinson(np.array([1.0, 0.5]))
        np.testing.assert_allclose(model.a, [0.5])
        np.testing.assert_allclose(model.error, 0.75)

    def test_ar1_data_order_two(self):
        model = levinson(np.array([1.0, 0.5, 0.25]))
        np.testing.assert_allclose(model.a, [0.5, 0.0], atol=1e-15)
        np.testing.assert_allclose(model.error, 0.75)

    def test_degenerate(self):
        model = levinson(np.zeros(11))
        assert model.degenerate
        assert model.error == 0.0
        assert np.array_equal(model.a, np.zeros(10))

    def test_matches_toeplitz_oracle(self, rng):
        for _ in range(50):
            frame = make_frame(rng.standard_normal(240))
            r = autocorrelate(frame, 10)
            model = levinson(r)
            np.testing.assert_allclose(model.a, toeplitz_solve_oracle(r),
                                       atol=1e-8)

    def test_reflection_consistency(self, rng):
        frame = make_frame(rng.standard_normal(240))
        model = levinson(autocorrelate(frame, 10))
        np.testing.assert_allclose(reflection_to_lpc(model.reflection), model.a,
                                   atol=1e-12)

    def test_stability_on_frames(self, small_train_utts, cfg):
        from speakervq.frontend import frames_from_utterance
        frames = frames_from_utterance(small_train_utts[0], cfg)
        for frame in frames:
            model = levinson(autocorrelate(frame, 10))
            if not model.degenerate:
                assert np.all(np.abs(model.reflection) < 1.0)

    def test_error_bounded_by_r0(self, rng):
        for _ in range(20):
            r = autocorrelate(make_frame(rng.standard_normal(240)), 10)
            model = levinson(r)
            assert 0.0 <= model.error <= r[0] + 1e-12


class TestCepstrum:
    def test_zero_model(self):
        assert np.array_equal(lpc_to_cepstrum(np.zeros(10), 12), np.zeros(12))

    def test_single_pole_series(self):
        alpha = 0.7
        c = lpc_to_cepstrum(np.array([alpha]), 12)
        expected = np.array([alpha ** n / n for n in range(1, 13)])
        np.testing.assert_allclose(c, expected, rtol=1e-12)

    def test_matches_fft_oracle(self, rng):
        for _ in range(40):
            a = random_stable_lpc(rng)
            c = lpc_to_cepstrum(a, 12)
            np.testing.assert_allclose(c, cepstrum_fft_oracle(a, 12), atol=1e-6)


class TestResidual:
    def test_zero_predictor_identity(self, rng):
        frame = make_frame(rng.standard_normal(240))
        e = inverse_filter_residual(frame, np.zeros(10))
        np.testing.assert_array_equal(e, frame.samples)

    def test_exact_ar_model(self, rng):
        a = random_stable_lpc(rng, p=10, kmax=0.5)
        history = rng.standard_normal(10)
        ext = list(history)
        for _ in range(240):
            ext.append(float(np.dot(a, ext[-1:-11:-1])))
        frame = make_frame(ext[10:], history=history)
        e = inverse_filter_residual(frame, a)
        np.testing.assert_allclose(e, np.zeros(240), atol=1e-10)

    def test_hand_case(self):
        samples = np.arange(1.0, 241.0)
        frame = make_frame(samples, history=np.zeros(1), p=1)
        e = inverse_filter_residual(frame, np.array([0.5]))
        assert e[0] == 1.0
        assert e[1] == 1.5
        np.testing.assert_allclose(e, samples - 0.5 * np.concatenate([[0], samples[:-1]]))

    def test_windowed_energy_bound_own_fit(self, small_train_utts, cfg):
        # with the windowed-residual toggle, the own-frame fit can never
        # lose to the zero predictor
        from speakervq.frontend import frames_from_utterance, hamming_window
        frames = frames_from_utterance(small_train_utts[0], cfg)
        for frame in frames[:40]:
            model = levinson(autocorrelate(frame, 10))
            e = inverse_filter_residual(frame, model.a, window=True)
            s = hamming_window(frame.samples)
            assert np.sum(e ** 2) <= np.sum(s ** 2) + 1e-12

    def test_unwindowed_energy_bounds(self, small_train_utts, cfg):
        from speakervq.frontend import frames_from_utterance
        frames = frames_from_utterance(small_train_utts[0], cfg)
        for frame in frames[:40]:
            model = levinson(autocorrelate(frame, 10))
            e = inverse_filter_residual(frame, model.a)
            assert np.sum(e ** 2) <= 4.0 * np.sum(frame.samples ** 2) + 1e-12

    def test_ar10_prediction_gain(self, rng):
        # frames cut from a strongly resonant AR(10) process: >= 10 dB gain
        from speakervq.frontend import frame_signal
        poles = 0.95 * np.exp(1j * np.pi * np.array([0.12, 0.3, 0.5, 0.68, 0.85]))
        denom = np.real(np.poly(np.concatenate([poles, np.conj(poles)])))
        from scipy.signal import lfilter
        x = lfilter([1.0], denom, rng.standard_normal(6000))
        frames = frame_signal(x, FrontendConfig())
        for frame in frames[5:25]:
            model = levinson(autocorrelate(frame, 10))
            e = inverse_filter_residual(frame, model.a)
            assert np.sum(e ** 2) <= 0.1 * np.sum(frame.samples ** 2)

    def test_history_too_short(self):
        frame = make_frame(np.ones(240), history=np.zeros(3))
        with pytest.raises(ValueError, match="history"):
            inverse_filter_residual(frame, np.zeros(10))


def test_prediction_gain_db():
    x = np.ones(100)
    assert prediction_gain_db(x, x * 0.1) == pytest.approx(20.0)

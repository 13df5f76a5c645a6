"""Signal-path tests: framing arithmetic, round trips, overlap-add
normalization, filterbank geometry. Oracles are direct DFT facts
(windowed-constant bin-0 mass, peak-bin location for on-grid sines).
"""

import numpy as np
import pytest

from bivocoder.dsp import (
    Spectra,
    StftConfig,
    cola_deviation,
    frame_count,
    hz_to_mel,
    istft,
    log_amplitude,
    mel_filterbank,
    mel_spectrogram,
    mel_to_hz,
    stft,
    window_square_sum,
)

CFG = StftConfig()


class TestConfig:
    def test_defaults(self):
        assert (CFG.sample_rate, CFG.frame_length, CFG.frame_shift,
                CFG.fft_size) == (16000, 320, 40, 1024)
        assert CFG.bins == 513 and CFG.pad == 160

    def test_ordering_validated(self):
        with pytest.raises(ValueError):
            StftConfig(frame_length=320, frame_shift=400)
        with pytest.raises(ValueError):
            StftConfig(frame_length=2048, fft_size=1024)
        with pytest.raises(ValueError):
            StftConfig(frame_shift=0)

    def test_non_overlap_add_window_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            StftConfig(window=rng.random(320) + 0.5)

    def test_cola_deviation_default(self):
        assert cola_deviation(CFG) < 1e-10

    def test_window_square_sum_interior_constant(self):
        wsq = window_square_sum(CFG, frames=60)
        interior = wsq[CFG.frame_length:-CFG.frame_length]
        np.testing.assert_allclose(interior, interior[0], rtol=1e-12)


class TestStft:
    def test_frame_count_formula(self):
        for n in (1, 39, 40, 41, 799, 8000, 8001, 16000):
            assert frame_count(n, CFG) == n // CFG.frame_shift + 1
        with pytest.raises(ValueError):
            frame_count(0, CFG)

    def test_empty_waveform_rejected(self):
        with pytest.raises(ValueError):
            stft(np.zeros(0), CFG)

    def test_zero_waveform_zero_spectra(self):
        spec = stft(np.zeros(4000), CFG)
        assert spec.amplitude.shape == (101, 513)
        np.testing.assert_array_equal(spec.amplitude, 0.0)
        np.testing.assert_array_equal(spec.phase, 0.0)

    def test_constant_signal_dc_mass(self):
        # an all-ones frame windowed by w has DFT bin 0 equal to sum(w)
        spec = stft(np.ones(8000), CFG)
        interior = spec.amplitude[100]
        np.testing.assert_allclose(interior[0], CFG.window.sum(), rtol=1e-12)

    @pytest.mark.parametrize("k", [8, 32, 200])
    def test_on_grid_sine_peaks_at_its_bin(self, k):
        f = k * CFG.sample_rate / CFG.fft_size
        x = np.sin(2 * np.pi * f * np.arange(8000) / CFG.sample_rate)
        spec = stft(x, CFG)
        assert int(np.argmax(spec.amplitude[100])) == k

    def test_amplitude_scales_with_gain(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(2000)
        a, b = stft(x, CFG), stft(-2.5 * x, CFG)
        np.testing.assert_allclose(b.amplitude, 2.5 * a.amplitude, atol=1e-12)

    def test_phase_in_principal_range(self):
        rng = np.random.default_rng(1)
        spec = stft(rng.standard_normal(6000), CFG)
        assert (spec.phase > -np.pi).all() and (spec.phase <= np.pi).all()

    def test_batched_matches_single(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 2000))
        batched = stft(x, CFG)
        for i in range(3):
            single = stft(x[i], CFG)
            np.testing.assert_array_equal(batched.amplitude[i], single.amplitude)
            np.testing.assert_array_equal(batched.phase[i], single.phase)


class TestIstft:
    def test_zero_spectra_zero_waveform(self):
        spec = Spectra(np.zeros((101, 513)), np.zeros((101, 513)))
        np.testing.assert_array_equal(istft(spec, CFG, 4000), 0.0)

    @pytest.mark.parametrize("n", [40, 41, 799, 4000, 8000, 8001, 16000])
    def test_roundtrip_float64(self, n):
        rng = np.random.default_rng(n)
        x = rng.standard_normal(n)
        y = istft(stft(x, CFG), CFG, n)
        rel = np.linalg.norm(y - x) / np.linalg.norm(x)
        assert rel < 1e-6

    def test_roundtrip_float32(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(16000).astype(np.float32)
        y = istft(stft(x, CFG), CFG, 16000)
        assert y.dtype == np.float32
        rel = np.linalg.norm(y - x) / np.linalg.norm(x)
        assert rel < 1e-3

    def test_linear_in_amplitude(self):
        rng = np.random.default_rng(4)
        spec = stft(rng.standard_normal(2000), CFG)
        one = istft(spec, CFG, 2000)
        two = istft(Spectra(2.0 * spec.amplitude, spec.phase), CFG, 2000)
        np.testing.assert_allclose(two, 2.0 * one, rtol=1e-10, atol=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            istft(Spectra(np.zeros((10, 513)), np.zeros((11, 513))), CFG, 100)
        with pytest.raises(ValueError):
            istft(Spectra(np.zeros((10, 100)), np.zeros((10, 100))), CFG, 100)

    def test_length_bounds(self):
        spec = Spectra(np.zeros((10, 513)), np.zeros((10, 513)))
        limit = 9 * CFG.frame_shift + CFG.pad
        assert istft(spec, CFG, limit).shape == (limit,)
        with pytest.raises(ValueError):
            istft(spec, CFG, limit + 1)
        with pytest.raises(ValueError):
            istft(spec, CFG, 0)


class TestMel:
    def test_scale_roundtrip(self):
        f = np.array([0.0, 100.0, 1000.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)

    def test_filterbank_shape_and_bounds(self):
        fb = mel_filterbank(CFG, 80)
        assert fb.shape == (80, 513)
        assert (fb >= 0.0).all() and fb.max() <= 1.0

    def test_centers_strictly_increasing(self):
        fb = mel_filterbank(CFG, 80)
        centers = fb.argmax(axis=1)
        assert (np.diff(centers) > 0).all()

    def test_interior_bins_covered(self):
        fb = mel_filterbank(CFG, 80)
        interior = fb[:, 1:-1]  # strictly inside (0, Nyquist)
        assert (interior.sum(axis=0) > 0.0).all()

    def test_n_mels_bounds(self):
        with pytest.raises(ValueError):
            mel_filterbank(CFG, 0)
        with pytest.raises(ValueError):
            mel_filterbank(CFG, 514)
        assert mel_filterbank(CFG, 513).shape == (513, 513)

    def test_log_amplitude_values(self):
        got = log_amplitude(np.array([1.0, 0.0, np.e]))
        np.testing.assert_allclose(got, [0.0, np.log(1e-5), 1.0], rtol=1e-12)

    def test_mel_spectrogram_zero_input(self):
        m = mel_spectrogram(np.zeros(8000), CFG)
        assert m.shape == (201, 80)
        np.testing.assert_allclose(m, np.log(1e-5), rtol=1e-12)

    def test_shift_equivariance_on_interior_frames(self):
        # prepending exactly one hop of zeros moves every frame index up
        # by one; interior frames must agree bit-for-bit in geometry terms
        rng = np.random.default_rng(5)
        x = rng.standard_normal(4000)
        a = mel_spectrogram(x, CFG)
        b = mel_spectrogram(np.concatenate([np.zeros(CFG.frame_shift), x]), CFG)
        inner = slice(CFG.pad // CFG.frame_shift + 1, a.shape[0] - CFG.pad // CFG.frame_shift - 1)
        np.testing.assert_allclose(b[1:][inner], a[inner], atol=1e-10)

"""STFT analysis/synthesis and mel spectrograms, differentiable end to end.

Analysis: reflect center-padding of frame_length/2, periodic Hann window,
frames = floor(len/shift) + 1, frames zero-padded to fft_size. Synthesis
is weighted overlap-add with the same window, normalized by the
per-sample squared-window sum, which makes the round trip exact to
machine precision wherever the signal is covered (everywhere inside the
trimmed output). Both directions run through the autodiff ops, so
gradients flow from waveform losses back into predicted spectra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.signal

from . import numerics as nm
from .numerics import Tensor

ArrayOrTensor = Union[np.ndarray, Tensor]


def _periodic_hann(length: int) -> np.ndarray:
    return scipy.signal.get_window("hann", length, fftbins=True).astype(np.float64)


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis geometry. Defaults: 16 kHz, 20 ms frames every
    2.5 ms, 1024-point FFT (513 bins)."""

    sample_rate: int = 16000
    frame_length: int = 320
    frame_shift: int = 40
    fft_size: int = 1024
    window: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (0 < self.frame_shift <= self.frame_length <= self.fft_size):
            raise ValueError(
                f"need 0 < shift <= frame_length <= fft_size, got "
                f"{self.frame_shift}/{self.frame_length}/{self.fft_size}")
        if self.window is None:
            object.__setattr__(self, "window", _periodic_hann(self.frame_length))
        if self.window.shape != (self.frame_length,):
            raise ValueError("window length must equal frame_length")
        dev = cola_deviation(self)
        if dev > 1e-6:
            raise ValueError(
                f"window does not satisfy COLA at shift {self.frame_shift} "
                f"(deviation {dev:.3e})")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        return self.frame_length // 2


@dataclass
class Spectra:
    """Amplitude (linear magnitude) and phase in radians, (..., frames, bins).

    Fields are Tensors inside the training graph and ndarrays otherwise.
    """

    amplitude: ArrayOrTensor
    phase: ArrayOrTensor

    @property
    def shape(self):
        return self.amplitude.shape

    def numpy(self) -> "Spectra":
        amp = self.amplitude.data if isinstance(self.amplitude, Tensor) else self.amplitude
        ph = self.phase.data if isinstance(self.phase, Tensor) else self.phase
        return Spectra(amp, ph)


def frame_count(n_samples: int, config: StftConfig) -> int:
    if n_samples < 1:
        raise ValueError("cannot frame an empty signal")
    return n_samples // config.frame_shift + 1


def _reflect_indices(n: int, config: StftConfig) -> np.ndarray:
    """Frame gather map (frames, frame_length) into the unpadded signal.

    Positions outside [0, n) are reflected about the edges (no edge
    repeat), matching np.pad mode="reflect".
    """
    frames = frame_count(n, config)
    pos = (np.arange(frames)[:, None] * config.frame_shift
           + np.arange(config.frame_length)[None, :] - config.pad)
    if n == 1:
        return np.zeros_like(pos)
    period = 2 * (n - 1)
    pos = np.abs(pos) % period
    return np.where(pos >= n, period - pos, pos)


def stft(x: ArrayOrTensor, config: StftConfig) -> Spectra:
    """x (..., n) -> Spectra of (..., frames, bins). Phase in (-pi, pi]."""
    was_array = not isinstance(x, Tensor)
    xt = nm.astensor(x)
    n = xt.shape[-1]
    idx = _reflect_indices(n, config)
    frames = nm.gather_last(xt, idx) * config.window.astype(xt.dtype)
    z = nm.rfft_stacked(frames, config.fft_size)
    re, im = z[..., 0, :], z[..., 1, :]
    amp = nm.complex_abs(re, im)
    phase = nm.arctan2(im, re)
    # arctan2 can land on exactly -pi; fold it to +pi (measure-zero shift,
    # constant offset, so gradients are untouched)
    fold = (phase.data <= -np.pi).astype(phase.dtype) * (2.0 * np.pi)
    phase = phase + fold
    out = Spectra(amp, phase)
    return out.numpy() if was_array else out


def window_square_sum(config: StftConfig, frames: int) -> np.ndarray:
    """Per-sample sum of squared synthesis windows over the padded grid."""
    length = (frames - 1) * config.frame_shift + config.frame_length
    pos = (np.arange(frames)[:, None] * config.frame_shift
           + np.arange(config.frame_length)[None, :])
    wsq = np.zeros(length, dtype=np.float64)
    np.add.at(wsq, pos, np.broadcast_to(config.window ** 2, pos.shape))
    return wsq


def cola_deviation(config: StftConfig) -> float:
    """Max deviation of the interior squared-window overlap from constant."""
    reps = 4 * (config.frame_length // config.frame_shift + 1)
    wsq = window_square_sum(config, reps)
    interior = wsq[config.frame_length:-config.frame_length]
    if interior.size == 0:
        return float("inf")
    mean = interior.mean()
    return float(np.abs(interior - mean).max() / max(mean, 1e-300))


def istft(spectra: Spectra, config: StftConfig, length: int) -> ArrayOrTensor:
    """Spectra (..., frames, bins) -> waveform (..., length) via WOLA.

    length may be anything the frame grid covers:
    length <= (frames-1)*shift + frame_length/2.
    """
    amp, phase = spectra.amplitude, spectra.phase
    was_array = not isinstance(amp, Tensor)
    amp, phase = nm.astensor(amp), nm.astensor(phase)
    if amp.shape != phase.shape:
        raise ValueError(f"amplitude/phase shape mismatch: {amp.shape} vs {phase.shape}")
    frames = amp.shape[-2]
    max_len = (frames - 1) * config.frame_shift + config.pad
    if not (0 < length <= max_len):
        raise ValueError(f"length {length} outside (0, {max_len}] for {frames} frames")
    if amp.shape[-1] != config.bins:
        raise ValueError(f"expected {config.bins} bins, got {amp.shape[-1]}")
    re = amp * nm.cos(phase)
    im = amp * nm.sin(phase)
    head = re.shape[:-1] + (1, config.bins)
    z = nm.concat([re.reshape(head), im.reshape(head)], axis=-2)
    full = nm.irfft_stacked(z, config.fft_size)
    synth = full[..., : config.frame_length] * config.window.astype(amp.dtype)
    pos = (np.arange(frames)[:, None] * config.frame_shift
           + np.arange(config.frame_length)[None, :])
    padded_len = (frames - 1) * config.frame_shift + config.frame_length
    y = nm.scatter_add_last(synth, pos, padded_len)
    wsq = window_square_sum(config, frames)
    # clamp in the OUTPUT dtype so 1/wsq stays finite (0-coverage samples
    # exist only in the trimmed padding; 0 * finite keeps gradients clean)
    tiny = np.finfo(amp.dtype).tiny
    norm = (1.0 / np.maximum(wsq, tiny)).astype(amp.dtype)
    y = y * norm
    y = y[..., config.pad : config.pad + length]
    return y.data if was_array else y


_MEL_CACHE: dict[tuple, np.ndarray] = {}


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: StftConfig, n_mels: int = 80) -> np.ndarray:
    """Triangular filters (n_mels, bins), peak 1, HTK mel scale, 0..sr/2."""
    if not (1 <= n_mels <= config.bins):
        raise ValueError(f"n_mels must be in [1, {config.bins}], got {n_mels}")
    key = (config.sample_rate, config.fft_size, n_mels)
    cached = _MEL_CACHE.get(key)
    if cached is not None:
        return cached
    points = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(config.sample_rate / 2.0),
                                   n_mels + 2))
    freqs = np.arange(config.bins) * config.sample_rate / config.fft_size
    lo, mid, hi = points[:-2, None], points[1:-1, None], points[2:, None]
    rising = (freqs - lo) / np.maximum(mid - lo, 1e-12)
    falling = (hi - freqs) / np.maximum(hi - mid, 1e-12)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    _MEL_CACHE[key] = fb
    return fb


def log_amplitude(amp: ArrayOrTensor, floor: float = 1e-5) -> ArrayOrTensor:
    """Natural log of the amplitude, floored to keep silence finite."""
    if isinstance(amp, Tensor):
        return nm.log(nm.maximum(amp, floor))
    return np.log(np.maximum(amp, floor))


def mel_spectrogram(x: ArrayOrTensor, config: StftConfig, n_mels: int = 80,
                    floor: float = 1e-5) -> ArrayOrTensor:
    """x (..., n) -> floored log-mel (..., frames, n_mels)."""
    spec = stft(x, config)
    fb_t = mel_filterbank(config, n_mels).T  # (bins, n_mels)
    if isinstance(spec.amplitude, Tensor):
        mel = nm.matmul(spec.amplitude, nm.Tensor(fb_t.astype(spec.amplitude.dtype)))
    else:
        mel = spec.amplitude @ fb_t.astype(spec.amplitude.dtype)
    return log_amplitude(mel, floor)

"""Objective evaluation: SNR, log-amplitude-spectrum RMSE, mel-cepstral
distortion, YIN F0 comparison, and a real-time-factor benchmark.

Everything here is plain numpy on ndarrays; nothing builds a graph.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft

from .dsp import StftConfig, mel_filterbank, stft


@dataclass
class UtteranceMetrics:
    name: str
    n_samples: int
    snr_db: float
    las_rmse_db: float
    mcd_db: float
    f0_rmse_cents: float | None  # None when no frame is voiced in both
    vuv_error_percent: float

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "n_samples": self.n_samples,
            "snr_db": self.snr_db,
            "las_rmse_db": self.las_rmse_db,
            "mcd_db": self.mcd_db,
            "f0_rmse_cents": self.f0_rmse_cents,
            "vuv_error_percent": self.vuv_error_percent,
        }


@dataclass
class MetricReport:
    utterances: list[UtteranceMetrics] = field(default_factory=list)

    def summary(self) -> dict:
        out: dict = {"utterances": len(self.utterances)}
        if not self.utterances:
            return out
        for key in ("snr_db", "las_rmse_db", "mcd_db", "vuv_error_percent"):
            out[key] = float(np.mean([getattr(u, key) for u in self.utterances]))
        f0 = [u.f0_rmse_cents for u in self.utterances if u.f0_rmse_cents is not None]
        out["f0_rmse_cents"] = float(np.mean(f0)) if f0 else None
        return out


def _check_pair(ref: np.ndarray, deg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.asarray(ref, dtype=np.float64)
    deg = np.asarray(deg, dtype=np.float64)
    if ref.shape != deg.shape or ref.ndim != 1:
        raise ValueError(f"need equal-length 1-d signals, got {ref.shape} vs {deg.shape}")
    return ref, deg


def snr(ref: np.ndarray, deg: np.ndarray, cap_db: float = 100.0) -> float:
    """10*log10(sum(ref^2) / sum((ref-deg)^2)), capped at +cap_db."""
    ref, deg = _check_pair(ref, deg)
    ref_energy = float(np.sum(ref * ref))
    if ref_energy == 0.0:
        raise ValueError("SNR undefined for an all-zero reference")
    noise = float(np.sum((ref - deg) ** 2))
    if noise == 0.0:
        return cap_db
    return float(min(10.0 * np.log10(ref_energy / noise), cap_db))


def las_rmse(ref: np.ndarray, deg: np.ndarray, config: StftConfig,
             floor: float = 1e-5) -> float:
    """RMSE between 20*log10 floored amplitude spectra, in dB."""
    ref, deg = _check_pair(ref, deg)
    la_r = 20.0 * np.log10(np.maximum(stft(ref, config).amplitude, floor))
    la_d = 20.0 * np.log10(np.maximum(stft(deg, config).amplitude, floor))
    return float(np.sqrt(np.mean((la_r - la_d) ** 2)))


def mel_cepstrum(x: np.ndarray, config: StftConfig, order: int = 40,
                 n_mels: int = 80, floor: float = 1e-5) -> np.ndarray:
    """(frames, order+1) DCT-II (ortho) coefficients of the floored
    log-mel spectrogram; column 0 is the energy-like c0."""
    if order + 1 > n_mels:
        raise ValueError(f"order {order} needs more than {n_mels} mel bands")
    amp = stft(np.asarray(x, dtype=np.float64), config).amplitude
    mel = np.log(np.maximum(amp @ mel_filterbank(config, n_mels).T, floor))
    return scipy.fft.dct(mel, type=2, norm="ortho", axis=-1)[:, : order + 1]


_MCD_SCALE = 10.0 * np.sqrt(2.0) / np.log(10.0)


def mcd_from_cepstra(c_ref: np.ndarray, c_deg: np.ndarray) -> float:
    """(10*sqrt(2)/ln10) * mean_frames ||delta c_{1..D}||_2, c0 excluded."""
    if c_ref.shape != c_deg.shape:
        raise ValueError(f"cepstra shapes differ: {c_ref.shape} vs {c_deg.shape}")
    diff = c_ref[:, 1:] - c_deg[:, 1:]
    return float(_MCD_SCALE * np.mean(np.sqrt(np.sum(diff * diff, axis=1))))


def mcd(ref: np.ndarray, deg: np.ndarray, config: StftConfig,
        order: int = 40, n_mels: int = 80) -> float:
    ref, deg = _check_pair(ref, deg)
    return mcd_from_cepstra(mel_cepstrum(ref, config, order, n_mels),
                            mel_cepstrum(deg, config, order, n_mels))


# ---- F0 --------------------------------------------------------------------


@dataclass
class F0Track:
    f0_hz: np.ndarray        # 0.0 where unvoiced
    voiced: np.ndarray       # bool
    frame_shift_ms: float

    def __post_init__(self):
        if self.f0_hz.shape != self.voiced.shape:
            raise ValueError("f0 and voiced flags must align")


def estimate_f0(x: np.ndarray, sample_rate: int = 16000, fmin: float = 60.0,
                fmax: float = 400.0, frame_shift_ms: float = 5.0,
                threshold: float = 0.15, window_ms: float = 25.0) -> F0Track:
    """YIN with the cumulative-mean-normalized difference function,
    absolute threshold, local-minimum extension and parabolic refinement.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("estimate_f0 takes a 1-d signal")
    if not (0 < fmin < fmax < sample_rate / 2):
        raise ValueError(f"need 0 < fmin < fmax < Nyquist, got {fmin}/{fmax}")
    hop = int(round(sample_rate * frame_shift_ms / 1000.0))
    w = int(round(sample_rate * window_ms / 1000.0))
    tau_min = max(2, int(sample_rate / fmax))
    tau_max = int(np.ceil(sample_rate / fmin))
    need = w + tau_max
    if len(x) < need:
        x = np.pad(x, (0, need - len(x)))
    n_frames = (len(x) - need) // hop + 1
    starts = np.arange(n_frames) * hop
    frames = x[starts[:, None] + np.arange(need)[None, :]]

    # difference function d(tau) = E0 + E(tau) - 2*corr(tau), batched FFT
    nfft = scipy.fft.next_fast_len(2 * need)
    spec_w = scipy.fft.rfft(frames[:, :w], nfft, axis=1)
    spec_full = scipy.fft.rfft(frames, nfft, axis=1)
    corr = scipy.fft.irfft(np.conj(spec_w) * spec_full, nfft,
                           axis=1)[:, : tau_max + 1]
    sq = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(frames * frames, axis=1)],
                        axis=1)
    energy = sq[:, w : w + tau_max + 1] - sq[:, : tau_max + 1]
    d = energy[:, :1] + energy - 2.0 * corr
    d = np.maximum(d, 0.0)  # clip tiny negative round-off

    # cumulative mean normalization; cmnd(0) = 1 by definition
    running = np.cumsum(d[:, 1:], axis=1)
    taus = np.arange(1, tau_max + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmnd = np.where(running > 0.0, d[:, 1:] * taus / running, 1.0)
    cmnd = np.concatenate([np.ones((n_frames, 1)), cmnd], axis=1)

    f0 = np.zeros(n_frames)
    voiced = np.zeros(n_frames, dtype=bool)
    for i in range(n_frames):
        c = cmnd[i]
        below = np.flatnonzero(c[tau_min : tau_max + 1] < threshold)
        if below.size == 0:
            continue
        tau = tau_min + int(below[0])
        while tau + 1 <= tau_max and c[tau + 1] < c[tau]:
            tau += 1
        delta = 0.0
        if 0 < tau < tau_max:
            denom = c[tau - 1] - 2.0 * c[tau] + c[tau + 1]
            if abs(denom) > 1e-12:
                delta = float(np.clip(0.5 * (c[tau - 1] - c[tau + 1]) / denom,
                                      -1.0, 1.0))
        voiced[i] = True
        f0[i] = sample_rate / (tau + delta)
    return F0Track(f0, voiced, frame_shift_ms)


def f0_metrics(ref: F0Track, deg: F0Track) -> dict:
    """F0 RMSE in cents over frames voiced in both tracks, plus the
    voiced/unvoiced disagreement rate in percent."""
    if ref.f0_hz.shape != deg.f0_hz.shape:
        raise ValueError(f"track lengths differ: {ref.f0_hz.shape} vs {deg.f0_hz.shape}")
    both = ref.voiced & deg.voiced
    vuv = 100.0 * float(np.mean(ref.voiced != deg.voiced))
    if not both.any():
        return {"f0_rmse_cents": None, "vuv_error_percent": vuv,
                "frames_compared": 0}
    cents = 1200.0 * np.log2(deg.f0_hz[both] / ref.f0_hz[both])
    return {"f0_rmse_cents": float(np.sqrt(np.mean(cents ** 2))),
            "vuv_error_percent": vuv, "frames_compared": int(both.sum())}


# ---- corpus evaluation -------------------------------------------------------


def evaluate_pair(name: str, ref: np.ndarray, deg: np.ndarray,
                  config: StftConfig) -> UtteranceMetrics:
    ref, deg = _check_pair(ref, deg)
    f0 = f0_metrics(estimate_f0(ref, config.sample_rate),
                    estimate_f0(deg, config.sample_rate))
    return UtteranceMetrics(
        name=name, n_samples=len(ref),
        snr_db=snr(ref, deg),
        las_rmse_db=las_rmse(ref, deg, config),
        mcd_db=mcd(ref, deg, config),
        f0_rmse_cents=f0["f0_rmse_cents"],
        vuv_error_percent=f0["vuv_error_percent"])


# ---- real-time factor ---------------------------------------------------------


@dataclass
class RtfReport:
    audio_seconds: float
    run_seconds: list[float]
    rtf: float            # median synthesis seconds per audio second
    speed_factor: float   # 1 / rtf

    def to_record(self) -> dict:
        return {"audio_seconds": self.audio_seconds, "run_seconds": self.run_seconds,
                "rtf": self.rtf, "speed_factor": self.speed_factor}


def rtf_bench(synthesize: Callable[[], object], audio_seconds: float,
              repeats: int = 5, warmup: int = 1,
              timer: Callable[[], float] = time.perf_counter) -> RtfReport:
    """Times repeated synthesis runs of a fixed clip. The closure should
    cover synthesis only (feature extraction stays outside). Warm-up
    runs are discarded; the reported RTF is the median.
    """
    if repeats < 1:
        raise ValueError("need at least one timed repeat")
    if audio_seconds <= 0:
        raise ValueError("audio_seconds must be positive")
    for _ in range(warmup):
        synthesize()
    times = []
    for _ in range(repeats):
        t0 = timer()
        synthesize()
        times.append(timer() - t0)
    rtf = float(np.median(times) / audio_seconds)
    return RtfReport(audio_seconds=audio_seconds, run_seconds=times, rtf=rtf,
                     speed_factor=1.0 / rtf)


def benchmark_model(model, audio_seconds: float = 4.0, repeats: int = 5,
                    warmup: int = 1,
                    timer: Callable[[], float] = time.perf_counter) -> RtfReport:
    """RTF of waveform generation from features (extraction excluded)."""
    length = int(round(audio_seconds * model.config.stft.sample_rate))
    rng = np.random.default_rng(0)
    probe = (0.1 * rng.standard_normal(length)).astype(model.config.np_dtype)
    feats = model.extract_features(probe)
    return rtf_bench(lambda: model.synthesize(feats, length), audio_seconds,
                     repeats=repeats, warmup=warmup, timer=timer)

"""Generator training objectives.

Spectral reconstruction terms: log-amplitude MSE, anti-wrapped phase
loss (instantaneous phase + group delay + instantaneous angular
frequency), real/imaginary MSE on the reconstructed complex spectrum,
and a log-mel MAE on the synthesized waveform. Adversarial terms come
from adversary.py. generator_total combines everything under the
configured weights and reports each raw term; a non-finite term raises
LossError naming the culprit instead of poisoning the step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .adversary import DiscOutput, feature_matching_loss, hinge_g_loss
from .dsp import Spectra, StftConfig, log_amplitude, mel_spectrogram
from .numerics import Tensor

TWO_PI = 2.0 * np.pi


class LossError(RuntimeError):
    """A loss term evaluated to NaN/Inf."""


@dataclass(frozen=True)
class LossWeights:
    amplitude: float = 45.0
    phase: float = 100.0
    complex: float = 45.0
    mel: float = 45.0
    adversarial: float = 1.0
    feature_matching: float = 2.0


def anti_wrap(x):
    """|x - 2*pi*round(x / 2*pi)|: distance to the nearest multiple of
    2*pi. Gradient treats round() as constant. Tensor or ndarray."""
    if isinstance(x, Tensor):
        return nm.abs_(x - TWO_PI * nm.round_(x * (1.0 / TWO_PI)))
    return np.abs(x - TWO_PI * np.round(x / TWO_PI))


def amplitude_loss(spec_true: Spectra, spec_pred: Spectra,
                   floor: float = 1e-5) -> Tensor:
    """MSE between floored log-amplitudes."""
    lt = log_amplitude(nm.astensor(spec_true.amplitude), floor)
    lp = log_amplitude(nm.astensor(spec_pred.amplitude), floor)
    d = lt - lp
    return nm.mean(d * d)


def _mean_or_zero(t: Tensor, like: Tensor) -> Tensor:
    # empty difference arrays appear when there is a single frame/bin
    if t.size == 0:
        return nm.astensor(0.0, like)
    return nm.mean(t)


def phase_loss(spec_true: Spectra, spec_pred: Spectra) -> Tensor:
    """Sum of anti-wrapped means over instantaneous phase error, group
    delay error (difference along bins) and instantaneous angular
    frequency error (difference along frames)."""
    pt = nm.astensor(spec_true.phase)
    pp = nm.astensor(spec_pred.phase)
    if pt.shape != pp.shape:
        raise ValueError(f"phase shapes differ: {pt.shape} vs {pp.shape}")
    ip = nm.mean(anti_wrap(pt - pp))
    gd_t = pt[..., :, 1:] - pt[..., :, :-1]
    gd_p = pp[..., :, 1:] - pp[..., :, :-1]
    gd = _mean_or_zero(anti_wrap(gd_t - gd_p), ip)
    iaf_t = pt[..., 1:, :] - pt[..., :-1, :]
    iaf_p = pp[..., 1:, :] - pp[..., :-1, :]
    iaf = _mean_or_zero(anti_wrap(iaf_t - iaf_p), ip)
    return ip + gd + iaf


def complex_loss(spec_true: Spectra, spec_pred: Spectra) -> Tensor:
    """MSE on the real part plus MSE on the imaginary part of the
    amplitude/phase reconstruction."""
    at, pt = nm.astensor(spec_true.amplitude), nm.astensor(spec_true.phase)
    ap, pp = nm.astensor(spec_pred.amplitude), nm.astensor(spec_pred.phase)
    dr = at * nm.cos(pt) - ap * nm.cos(pp)
    di = at * nm.sin(pt) - ap * nm.sin(pp)
    return nm.mean(dr * dr) + nm.mean(di * di)


def mel_loss(wav_true, wav_pred, config: StftConfig, n_mels: int = 80,
             floor: float = 1e-5) -> Tensor:
    """MAE between floored log-mel spectrograms of the two waveforms."""
    mt = mel_spectrogram(nm.astensor(wav_true), config, n_mels, floor)
    mp = mel_spectrogram(nm.astensor(wav_pred), config, n_mels, floor)
    return nm.mean(nm.abs_(mt - mp))


def _require_finite(name: str, value: Tensor) -> float:
    v = value.item()
    if not np.isfinite(v):
        raise LossError(f"loss term '{name}' is non-finite ({v})")
    return v


def generator_total(spec_true: Spectra, spec_pred: Spectra, wav_true, wav_pred,
                    fake_outputs: list[DiscOutput] | None,
                    real_outputs: list[DiscOutput] | None,
                    weights: LossWeights, stft_config: StftConfig,
                    n_mels: int = 80, amp_floor: float = 1e-5,
                    ) -> tuple[Tensor, dict[str, float]]:
    """Weighted sum of every generator term plus a per-term report.

    fake_outputs/real_outputs may both be None to train without the
    adversarial pair (the report then carries zeros for those terms).
    """
    terms: dict[str, Tensor] = {
        "amplitude": amplitude_loss(spec_true, spec_pred, amp_floor),
        "phase": phase_loss(spec_true, spec_pred),
        "complex": complex_loss(spec_true, spec_pred),
        "mel": mel_loss(wav_true, wav_pred, stft_config, n_mels, amp_floor),
    }
    if (fake_outputs is None) != (real_outputs is None):
        raise ValueError("fake_outputs and real_outputs must be passed together")
    if fake_outputs is not None:
        terms["adversarial"] = hinge_g_loss(fake_outputs)
        terms["feature_matching"] = feature_matching_loss(real_outputs, fake_outputs)
    report = {name: _require_finite(name, t) for name, t in terms.items()}
    scale = {
        "amplitude": weights.amplitude,
        "phase": weights.phase,
        "complex": weights.complex,
        "mel": weights.mel,
        "adversarial": weights.adversarial,
        "feature_matching": weights.feature_matching,
    }
    total = None
    for name, t in terms.items():
        wt = t * scale[name]
        total = wt if total is None else total + wt
    report.setdefault("adversarial", 0.0)
    report.setdefault("feature_matching", 0.0)
    report["total"] = _require_finite("total", total)
    return total, report

"""Discriminators and GAN losses.

Multi-period: one 2-d conv stack per period (2, 3, 5, 7, 11), waveform
reshaped to (time/p, p), kernel (5,1), stride (3,1) on all but the last
layer, LeakyReLU 0.1. Multi-resolution: one stack per STFT resolution
(512/128, 1024/256, 2048/512 as fft/hop, win = fft), convs over the
(frames, bins) magnitude map with kernel (3,9) and frequency stride 2 on
the middle layers. Unlike the usual formulation these convs carry
symmetric half-kernel padding so very short clips still produce a
score map. Hinge objectives average over sub-discriminators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .dsp import StftConfig, stft
from .modules import Conv2d, Module
from .numerics import Tensor

Periods = tuple[int, ...]
Resolutions = tuple[tuple[int, int, int], ...]

DEFAULT_PERIODS: Periods = (2, 3, 5, 7, 11)
DEFAULT_RESOLUTIONS: Resolutions = ((512, 128, 512), (1024, 256, 1024),
                                    (2048, 512, 2048))


@dataclass(frozen=True)
class DiscriminatorConfig:
    periods: Periods = DEFAULT_PERIODS
    resolutions: Resolutions = DEFAULT_RESOLUTIONS
    mpd_channels: tuple[int, ...] = (32, 128, 512, 1024, 1024)
    mrd_channels: int = 32
    leaky_slope: float = 0.1
    sample_rate: int = 16000
    dtype: str = "float32"

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


DISC_PRESETS: dict[str, DiscriminatorConfig] = {
    "base": DiscriminatorConfig(),
    "tiny": DiscriminatorConfig(mpd_channels=(4, 8, 8, 8, 8), mrd_channels=4),
}

# score and the intermediate activation maps feeding feature matching
DiscOutput = tuple[Tensor, list[Tensor]]


def _reflect_len_indices(n: int, total: int) -> np.ndarray:
    pos = np.arange(total)
    if n == 1:
        return np.zeros_like(pos)
    period = 2 * (n - 1)
    pos = np.abs(pos) % period
    return np.where(pos >= n, period - pos, pos)


class PeriodDiscriminator(Module):
    def __init__(self, period: int, cfg: DiscriminatorConfig, rng):
        dtype = cfg.np_dtype
        self.period = period
        self.slope = cfg.leaky_slope
        chans = cfg.mpd_channels
        self.convs = []
        prev = 1
        for i, ch in enumerate(chans):
            stride = (3, 1) if i < len(chans) - 1 else (1, 1)
            self.convs.append(Conv2d(prev, ch, (5, 1), rng, stride=stride,
                                     padding=(2, 0), dtype=dtype))
            prev = ch
        self.post = Conv2d(prev, 1, (3, 1), rng, padding=(1, 0), dtype=dtype)

    def __call__(self, x: Tensor) -> DiscOutput:
        b, t = x.shape
        p = self.period
        total = -(-t // p) * p
        if total != t:
            x = nm.gather_last(x, _reflect_len_indices(t, total))
        h = x.reshape((b, 1, total // p, p))
        fmaps = []
        for conv in self.convs:
            h = nm.leaky_relu(conv(h), self.slope)
            fmaps.append(h)
        score = self.post(h)
        fmaps.append(score)
        return score, fmaps


class ResolutionDiscriminator(Module):
    def __init__(self, resolution: tuple[int, int, int], cfg: DiscriminatorConfig,
                 rng):
        dtype = cfg.np_dtype
        nfft, hop, win = resolution
        self.stft_config = StftConfig(sample_rate=cfg.sample_rate,
                                      frame_length=win, frame_shift=hop,
                                      fft_size=nfft)
        self.slope = cfg.leaky_slope
        ch = cfg.mrd_channels
        specs = [((3, 9), (1, 1)), ((3, 9), (1, 2)), ((3, 9), (1, 2)),
                 ((3, 9), (1, 2)), ((3, 3), (1, 1))]
        self.convs = []
        prev = 1
        for kernel, stride in specs:
            pad = (kernel[0] // 2, kernel[1] // 2)
            self.convs.append(Conv2d(prev, ch, kernel, rng, stride=stride,
                                     padding=pad, dtype=dtype))
            prev = ch
        self.post = Conv2d(prev, 1, (3, 3), rng, padding=(1, 1), dtype=dtype)

    def __call__(self, x: Tensor) -> DiscOutput:
        amp = stft(x, self.stft_config).amplitude  # (B, frames, bins)
        h = amp.reshape((amp.shape[0], 1) + amp.shape[1:])
        fmaps = []
        for conv in self.convs:
            h = nm.leaky_relu(conv(h), self.slope)
            fmaps.append(h)
        score = self.post(h)
        fmaps.append(score)
        return score, fmaps


class MultiPeriodDiscriminator(Module):
    def __init__(self, cfg: DiscriminatorConfig, rng):
        self.subs = [PeriodDiscriminator(p, cfg, rng) for p in cfg.periods]

    def __call__(self, x: Tensor) -> list[DiscOutput]:
        return [sub(x) for sub in self.subs]


class MultiResolutionDiscriminator(Module):
    def __init__(self, cfg: DiscriminatorConfig, rng):
        self.subs = [ResolutionDiscriminator(r, cfg, rng) for r in cfg.resolutions]

    def __call__(self, x: Tensor) -> list[DiscOutput]:
        return [sub(x) for sub in self.subs]


class DiscriminatorSet(Module):
    """All sub-discriminators behind one call. x (B, T) waveform."""

    def __init__(self, cfg: DiscriminatorConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.mpd = MultiPeriodDiscriminator(cfg, rng)
        self.mrd = MultiResolutionDiscriminator(cfg, rng)

    def __call__(self, x) -> list[DiscOutput]:
        x = nm.astensor(x)
        if x.ndim != 2:
            raise ValueError(f"discriminators take (B, T) waveforms, got {x.shape}")
        return self.mpd(x) + self.mrd(x)


def discriminate(disc: DiscriminatorSet, x) -> list[DiscOutput]:
    return disc(x)


def hinge_d_loss(real_outputs: list[DiscOutput],
                 fake_outputs: list[DiscOutput]) -> Tensor:
    """mean over sub-discriminators of
    mean(relu(1 - D(real))) + mean(relu(1 + D(fake)))."""
    if len(real_outputs) != len(fake_outputs) or not real_outputs:
        raise ValueError("real/fake output lists must be non-empty and aligned")
    terms = []
    for (sr, _), (sf, _) in zip(real_outputs, fake_outputs):
        terms.append(nm.mean(nm.relu(1.0 - sr)) + nm.mean(nm.relu(1.0 + sf)))
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))


def hinge_g_loss(fake_outputs: list[DiscOutput]) -> Tensor:
    """mean over sub-discriminators of mean(relu(1 - D(fake)))."""
    if not fake_outputs:
        raise ValueError("no discriminator outputs")
    terms = [nm.mean(nm.relu(1.0 - sf)) for sf, _ in fake_outputs]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))


def feature_matching_loss(real_outputs: list[DiscOutput],
                          fake_outputs: list[DiscOutput]) -> Tensor:
    """Mean absolute error between matching activation maps, averaged
    over all maps of all sub-discriminators. Real maps are constants."""
    if len(real_outputs) != len(fake_outputs) or not real_outputs:
        raise ValueError("real/fake output lists must be non-empty and aligned")
    terms = []
    for (_, fr), (_, ff) in zip(real_outputs, fake_outputs):
        if len(fr) != len(ff):
            raise ValueError("feature map structure mismatch between real and fake")
        for r, f in zip(fr, ff):
            if r.shape != f.shape:
                raise ValueError(f"feature map shape mismatch {r.shape} vs {f.shape}")
            terms.append(nm.mean(nm.abs_(f - r.detach())))
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms))

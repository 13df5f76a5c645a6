"""The bidirectional vocoder.

Extraction: STFT -> log-amplitude and phase run through two parallel
ConvNeXt V2 stacks, each ending in a kernel-8/stride-8 downsampling
conv; the concatenated branches are fused to a compact feature sequence
(32 dims every 20 ms at the defaults).

Generation mirrors it: expand features to two branches, upsample each
by 8 with a transposed conv, run the ConvNeXt stacks, then predict
log-amplitude (exponentiated) and a real/imaginary pair combined by
arctan2 into phase. iSTFT turns the predicted spectra into samples.

Every non-pointwise conv outside the blocks uses kernel 7; up/down
sampling convs use kernel 8 stride 8.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Union

import numpy as np

from . import numerics as nm
from .dsp import Spectra, StftConfig, istft, log_amplitude, stft
from .modules import GRN, Conv1d, ConvTranspose1d, LayerNorm, Linear, Module
from .numerics import Tensor

# log-amplitude cap before exp(); keeps early-training spectra finite
_LOG_AMP_MAX = 11.5


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 256
    blocks: int = 8
    expansion: int = 4
    feature_dim: int = 32
    downsample: int = 8
    amp_floor: float = 1e-5
    dtype: str = "float32"
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        for name in ("channels", "blocks", "expansion", "feature_dim", "downsample"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def feature_shift(self) -> int:
        """Waveform samples per feature frame (320 at the defaults)."""
        return self.stft.frame_shift * self.downsample

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stft"] = {k: v for k, v in d["stft"].items() if k != "window"}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["stft"] = StftConfig(**d["stft"])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


PRESETS: dict[str, ModelConfig] = {
    "base": ModelConfig(),
    "tiny": ModelConfig(channels=8, blocks=1),
}


def preset_config(name: str, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset '{name}', have {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides) if overrides else PRESETS[name]


def preset_name(config: ModelConfig) -> str:
    """Preset whose digest matches, or "custom"."""
    for name, cfg in PRESETS.items():
        if cfg.digest() == config.digest():
            return name
    return "custom"


@dataclass
class FeatureSequence:
    """Extracted features, (frames, dim) float32, one frame per
    frame_shift samples at sample_rate."""

    data: np.ndarray
    sample_rate: int
    frame_shift: int

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {self.data.shape}")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


class ConvNeXtV2Block(Module):
    """Depthwise 7-conv, LayerNorm, pointwise expand, GELU, GRN,
    pointwise project, residual. x (B, C, T) -> same shape."""

    def __init__(self, channels: int, expansion: int, rng, dtype):
        hidden = channels * expansion
        self.dwconv = Conv1d(channels, channels, 7, rng, padding=3,
                             groups=channels, dtype=dtype)
        self.norm = LayerNorm(channels, dtype=dtype)
        self.pw1 = Linear(channels, hidden, rng, dtype=dtype)
        self.grn = GRN(hidden, dtype=dtype)
        self.pw2 = Linear(hidden, channels, rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.dwconv(x)
        h = nm.transpose(h, (0, 2, 1))  # (B, T, C): norm/linears act on C
        h = self.norm(h)
        h = nm.gelu(self.pw1(h))
        h = self.grn(h)
        h = self.pw2(h)
        return x + nm.transpose(h, (0, 2, 1))


class _ExtractorBranch(Module):
    def __init__(self, cfg: ModelConfig, rng, dtype):
        c = cfg.channels
        self.conv_in = Conv1d(cfg.stft.bins, c, 7, rng, padding=3, dtype=dtype)
        self.blocks = [ConvNeXtV2Block(c, cfg.expansion, rng, dtype)
                       for _ in range(cfg.blocks)]
        self.conv_out = Conv1d(c, c, 7, rng, padding=3, dtype=dtype)
        self.down = Conv1d(c, c, cfg.downsample, rng, stride=cfg.downsample,
                           dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.conv_in(x)
        for blk in self.blocks:
            h = blk(h)
        return self.down(self.conv_out(h))


class FeatureExtractor(Module):
    """Spectra (B, frames, bins) -> features (B, frames/downsample, dim)."""

    def __init__(self, cfg: ModelConfig, rng):
        dtype = cfg.np_dtype
        self.cfg = cfg
        self.amp_branch = _ExtractorBranch(cfg, rng, dtype)
        self.phase_branch = _ExtractorBranch(cfg, rng, dtype)
        self.fuse = Conv1d(2 * cfg.channels, cfg.feature_dim, 7, rng, padding=3,
                           dtype=dtype)

    def __call__(self, spectra: Spectra) -> Tensor:
        cfg = self.cfg
        la = log_amplitude(nm.astensor(spectra.amplitude), cfg.amp_floor)
        ph = nm.astensor(spectra.phase)
        la = nm.transpose(la, (0, 2, 1))  # (B, bins, frames)
        ph = nm.transpose(ph, (0, 2, 1))
        la = _pad_frames(la, cfg.downsample)
        ph = _pad_frames(ph, cfg.downsample)
        a = self.amp_branch(la)
        p = self.phase_branch(ph)
        fused = self.fuse(nm.concat([a, p], axis=1))
        return nm.transpose(fused, (0, 2, 1))  # (B, feat_frames, dim)


class _GeneratorBranch(Module):
    def __init__(self, cfg: ModelConfig, rng, dtype):
        c = cfg.channels
        self.conv_in = Conv1d(c, c, 7, rng, padding=3, dtype=dtype)
        self.up = ConvTranspose1d(c, c, cfg.downsample, rng, stride=cfg.downsample,
                                  dtype=dtype)
        self.blocks = [ConvNeXtV2Block(c, cfg.expansion, rng, dtype)
                       for _ in range(cfg.blocks)]

    def __call__(self, x: Tensor) -> Tensor:
        h = self.up(self.conv_in(x))
        for blk in self.blocks:
            h = blk(h)
        return h


class WaveformGenerator(Module):
    """Features (B, feat_frames, dim) -> Spectra (B, frames, bins)."""

    def __init__(self, cfg: ModelConfig, rng):
        dtype = cfg.np_dtype
        self.cfg = cfg
        c = cfg.channels
        self.expand = Conv1d(cfg.feature_dim, 2 * c, 7, rng, padding=3, dtype=dtype)
        self.amp_branch = _GeneratorBranch(cfg, rng, dtype)
        self.phase_branch = _GeneratorBranch(cfg, rng, dtype)
        self.amp_head = Conv1d(c, cfg.stft.bins, 7, rng, padding=3, dtype=dtype)
        self.phase_head_re = Conv1d(c, cfg.stft.bins, 7, rng, padding=3, dtype=dtype)
        self.phase_head_im = Conv1d(c, cfg.stft.bins, 7, rng, padding=3, dtype=dtype)

    def __call__(self, features: Tensor) -> Spectra:
        c = self.cfg.channels
        h = self.expand(nm.transpose(features, (0, 2, 1)))
        a = self.amp_branch(h[:, :c, :])
        p = self.phase_branch(h[:, c:, :])
        log_amp = nm.minimum(self.amp_head(a), _LOG_AMP_MAX)
        amp = nm.exp(log_amp)
        phase = nm.arctan2(self.phase_head_im(p), self.phase_head_re(p))
        fold = (phase.data <= -np.pi).astype(phase.dtype) * (2.0 * np.pi)
        phase = phase + fold
        return Spectra(nm.transpose(amp, (0, 2, 1)), nm.transpose(phase, (0, 2, 1)))


def _pad_frames(x: Tensor, multiple: int) -> Tensor:
    """Right-pad the time axis of (B, C, T) to a multiple by replicating
    the final frame."""
    t = x.shape[-1]
    r = (-t) % multiple
    if r == 0:
        return x
    last = x[:, :, t - 1 : t]
    return nm.concat([x] + [last] * r, axis=-1)


FeatureInput = Union[Tensor, np.ndarray, FeatureSequence]


class BiVocoder(Module):
    """Both directions plus the composed analysis-synthesis path.

    Tensor inputs stay Tensors (training graph); ndarray/FeatureSequence
    inputs run under no_grad and come back as plain arrays.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.config = config
        self.extractor = FeatureExtractor(config, rng)
        self.generator = WaveformGenerator(config, rng)

    # -- graph paths (Tensor in, Tensor out) -------------------------------

    def extract_features(self, waveform) -> FeatureInput:
        """waveform (B, n) or (n,) -> features (B, frames, dim); plain
        (n,) ndarray input returns a FeatureSequence."""
        if not isinstance(waveform, Tensor):
            arr = np.asarray(waveform)
            if arr.ndim == 1:
                with nm.no_grad():
                    feats = self.extract_features(Tensor(arr[None, :]))
                return FeatureSequence(feats.data[0].astype(np.float32),
                                       self.config.stft.sample_rate,
                                       self.config.feature_shift)
            waveform = Tensor(arr)
        single = waveform.ndim == 1
        if single:
            waveform = waveform.reshape(1, waveform.shape[0])
        spec = stft(_as_model_dtype(waveform, self.config), self.config.stft)
        feats = self.extractor(spec)
        return feats[0] if single else feats

    def generate_spectra(self, features: FeatureInput) -> Spectra:
        feats, to_array, single = self._norm_features(features)
        if to_array:
            with nm.no_grad():
                out = self.generator(feats)
            out = out.numpy()
        else:
            out = self.generator(feats)
        if single:
            out = Spectra(out.amplitude[0], out.phase[0])
        return out

    def synthesize(self, features: FeatureInput, length: int):
        """features -> waveform (..., length)."""
        feats, to_array, single = self._norm_features(features)
        frames = feats.shape[1] * self.config.downsample
        max_len = ((frames - 1) * self.config.stft.frame_shift
                   + self.config.stft.pad)
        if not (0 < length <= max_len):
            raise ValueError(
                f"length {length} not reachable from {feats.shape[1]} feature "
                f"frames (max {max_len} samples)")
        if to_array:
            with nm.no_grad():
                spec = self.generator(feats)
                wav = istft(spec, self.config.stft, length)
            wav = wav.data
        else:
            wav = istft(self.generator(feats), self.config.stft, length)
        return wav[0] if single else wav

    def analysis_synthesis(self, waveform):
        """Round trip at the original length; accepts (n,) or (B, n)."""
        if isinstance(waveform, Tensor):
            single = waveform.ndim == 1
            x = waveform.reshape(1, -1) if single else waveform
            y = self.synthesize(self.extract_features(x), x.shape[-1])
            return y[0] if single else y
        arr = np.asarray(waveform)
        single = arr.ndim == 1
        x = arr[None, :] if single else arr
        with nm.no_grad():
            feats = self.extract_features(Tensor(_coerce_dtype(x, self.config)))
            y = self.synthesize(feats, x.shape[-1])
        return y.data[0] if single else y.data

    # -- helpers ------------------------------------------------------------

    def _norm_features(self, features: FeatureInput):
        """Returns (batched Tensor, wants_array_out, was_single)."""
        if isinstance(features, FeatureSequence):
            arr = features.data.astype(self.config.np_dtype)
            return Tensor(arr[None, :, :]), True, True
        if isinstance(features, Tensor):
            single = features.ndim == 2
            f = features.reshape((1,) + features.shape) if single else features
            return f, False, single
        arr = np.asarray(features, dtype=self.config.np_dtype)
        single = arr.ndim == 2
        if single:
            arr = arr[None]
        return Tensor(arr), True, single


def _coerce_dtype(arr: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    return arr.astype(cfg.np_dtype, copy=False)


def _as_model_dtype(t: Tensor, cfg: ModelConfig) -> Tensor:
    if t.dtype == cfg.np_dtype:
        return t
    if t.requires_grad:
        raise TypeError(f"waveform dtype {t.dtype} does not match model "
                        f"dtype {cfg.dtype}")
    return Tensor(t.data.astype(cfg.np_dtype))

"""Adversarial training loop.

One step = one discriminator update on the detached fake, then one
generator/extractor update against the refreshed discriminators
(1:1 schedule). Everything that influences the trajectory (init,
batch sampling, optimizer state) is derived from the config seed and
serialized into checkpoints, so an interrupted run resumed from step k
reproduces the exact log records it would have written.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nm
from .adversary import DISC_PRESETS, DiscriminatorSet, hinge_d_loss
from .audio import read_wav
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dsp import Spectra, istft, stft
from .losses import LossError, LossWeights, generator_total, mel_loss
from .metrics import snr
from .model import PRESETS, BiVocoder, preset_config
from .numerics import AdamW, AdamWConfig, Tensor


@dataclass
class TrainConfig:
    data_dir: str = ""
    out_dir: str = ""
    preset: str = "base"
    seed: int = 1234
    max_steps: int = 2000
    batch_size: int = 16
    crop_length: int = 8000
    learning_rate: float = 2e-4
    beta1: float = 0.8
    beta2: float = 0.99
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    lr_decay: float = 0.999
    val_fraction: float = 0.05
    log_interval: int = 10
    checkpoint_interval: int = 500
    n_mels: int = 80
    lambda_amplitude: float = 45.0
    lambda_phase: float = 100.0
    lambda_complex: float = 45.0
    lambda_mel: float = 45.0
    lambda_adversarial: float = 1.0
    lambda_feature_matching: float = 2.0

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_amplitude, self.lambda_phase,
                           self.lambda_complex, self.lambda_mel,
                           self.lambda_adversarial, self.lambda_feature_matching)

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset '{self.preset}'")
        if self.batch_size < 1 or self.max_steps < 1 or self.crop_length < 1:
            raise ValueError("batch_size, max_steps and crop_length must be >= 1")
        if not (0 <= self.val_fraction < 1):
            raise ValueError("val_fraction must be in [0, 1)")


def parse_train_config(path) -> TrainConfig:
    """Flat key=value text; '#' starts a comment; keys match TrainConfig
    fields and values are coerced to the field types."""
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    casts = {"str": str, "int": int, "float": float}
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown key '{key}'")
        try:
            values[key] = casts[fields[key]](raw)
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: bad value for '{key}': {e}") from e
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def format_train_config(cfg: TrainConfig) -> str:
    return "".join(f"{f.name}={getattr(cfg, f.name)}\n"
                   for f in dataclasses.fields(TrainConfig))


@dataclass
class Utterance:
    name: str
    samples: np.ndarray  # float32 in [-1, 1)


def load_dataset(data_dir) -> list[Utterance]:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {data_dir}")
    paths = sorted(data_dir.glob("*.wav"))
    if not paths:
        raise FileNotFoundError(f"no .wav files under {data_dir}")
    return [Utterance(p.stem, read_wav(p)) for p in paths]


def split_train_val(utts: list[Utterance], val_fraction: float,
                    seed: int) -> tuple[list[Utterance], list[Utterance]]:
    """Deterministic shuffle-and-cut; never leaves the train side empty."""
    order = np.random.default_rng(seed).permutation(len(utts))
    n_val = min(int(len(utts) * val_fraction), len(utts) - 1)
    val_idx = set(order[:n_val].tolist())
    train = [u for i, u in enumerate(utts) if i not in val_idx]
    val = [u for i, u in enumerate(utts) if i in val_idx]
    return train, val


def sample_batch(utts: list[Utterance], crop_length: int, batch_size: int,
                 rng: np.random.Generator) -> np.ndarray:
    """(batch_size, crop_length) float32. Shorter utterances are
    zero-padded at the tail; longer ones get a random crop."""
    if not utts:
        raise ValueError("empty utterance list")
    out = np.zeros((batch_size, crop_length), dtype=np.float32)
    picks = rng.integers(0, len(utts), size=batch_size)
    for row, pick in enumerate(picks):
        x = utts[pick].samples
        if len(x) > crop_length:
            start = int(rng.integers(0, len(x) - crop_length + 1))
            out[row] = x[start : start + crop_length]
        else:
            out[row, : len(x)] = x
    return out


@dataclass
class TrainState:
    step: int = 0
    steps_per_epoch: int = 1
    data_rng_state: dict = field(default_factory=dict)


def synthesis_graph(model: BiVocoder, y: Tensor) -> tuple[Spectra, Spectra, Tensor]:
    """Full differentiable round trip on a (B, T) batch.

    Returns (true spectra, predicted spectra trimmed to the true frame
    count, predicted waveform). The generator emits spectra padded to a
    multiple of the downsample factor; the tail frames have no true
    counterpart, so spectral losses run on the trimmed view while the
    waveform (and everything downstream of it) still sees every frame.
    """
    stft_cfg = model.config.stft
    spec_true = stft(y, stft_cfg)
    feats = model.extractor(spec_true)
    spec_pred = model.generator(feats)
    wav_pred = istft(spec_pred, stft_cfg, y.shape[1])
    frames = spec_true.amplitude.shape[1]
    spec_fit = Spectra(spec_pred.amplitude[:, :frames],
                       spec_pred.phase[:, :frames])
    return spec_true, spec_fit, wav_pred


class Trainer:
    def __init__(self, config: TrainConfig):
        config.validate()
        self.config = config
        self.model = BiVocoder(preset_config(config.preset), seed=config.seed)
        self.disc = DiscriminatorSet(
            dataclasses.replace(DISC_PRESETS[config.preset],
                                dtype=self.model.config.dtype),
            seed=config.seed + 1)
        opt_cfg = AdamWConfig(lr=config.learning_rate, beta1=config.beta1,
                              beta2=config.beta2, eps=config.adam_eps,
                              weight_decay=config.weight_decay)
        self.opt_g = AdamW(list(self.model.named_parameters()), opt_cfg)
        self.opt_d = AdamW(list(self.disc.named_parameters()), opt_cfg)
        self.data_rng = np.random.default_rng(config.seed + 2)
        self.state = TrainState()

    # -- schedule -----------------------------------------------------------

    def current_lr(self) -> float:
        epoch = self.state.step // max(1, self.state.steps_per_epoch)
        return self.config.learning_rate * self.config.lr_decay ** epoch

    # -- one update ---------------------------------------------------------

    def train_step(self, batch: np.ndarray) -> dict[str, float]:
        cfg = self.config
        stft_cfg = self.model.config.stft
        lr = self.current_lr()
        y = Tensor(batch.astype(self.model.config.np_dtype))
        spec_true, spec_pred, wav_pred = synthesis_graph(self.model, y)

        # discriminator step on the detached fake
        real_out = self.disc(y)
        fake_det = self.disc(wav_pred.detach())
        d_loss = hinge_d_loss(real_out, fake_det)
        d_val = d_loss.item()
        if not np.isfinite(d_val):
            raise LossError(f"loss term 'discriminator' is non-finite ({d_val})")
        nm.backward(d_loss)
        self.opt_d.step(lr=lr)
        self.opt_d.zero_grad()

        # generator step against the updated discriminators
        with nm.no_grad():
            real_ref = self.disc(y)
        fake_out = self.disc(wav_pred)
        total, report = generator_total(
            spec_true, spec_pred, y, wav_pred, fake_out, real_ref,
            cfg.loss_weights(), stft_cfg, n_mels=cfg.n_mels,
            amp_floor=self.model.config.amp_floor)
        nm.backward(total)
        self.opt_g.step(lr=lr)
        self.opt_g.zero_grad()
        self.opt_d.zero_grad()  # drop grads the generator pass left on D

        self.model.assert_finite()
        self.disc.assert_finite()
        self.state.step += 1
        report["d_loss"] = d_val
        report["lr"] = lr
        report["step"] = self.state.step
        return report

    # -- validation -----------------------------------------------------------

    def validate(self, val: list[Utterance], max_utts: int = 4) -> dict[str, float]:
        crop = self.config.crop_length
        snrs, mels = [], []
        for u in val[:max_utts]:
            x = u.samples[:crop].astype(np.float64)
            if not np.any(x):
                continue
            yhat = self.model.analysis_synthesis(x.astype(
                self.model.config.np_dtype)).astype(np.float64)
            snrs.append(snr(x, yhat))
            with nm.no_grad():
                mels.append(mel_loss(x, yhat, self.model.config.stft,
                                     self.config.n_mels).item())
        if not snrs:
            return {}
        return {"val_snr": float(np.mean(snrs)), "val_mel": float(np.mean(mels))}

    # -- checkpointing ---------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "train_config": dataclasses.asdict(self.config),
            "steps_per_epoch": self.state.steps_per_epoch,
            "data_rng_state": _jsonable(self.data_rng.bit_generator.state),
        }
        sections = {
            "disc": self.disc.state_arrays(),
            "opt_g": self.opt_g.state_arrays(),
            "opt_d": self.opt_d.state_arrays(),
        }
        save_checkpoint(path, self.model, step=self.state.step,
                        sections=sections, meta=meta)

    def resume(self, checkpoint: Checkpoint) -> None:
        if checkpoint.config.digest() != self.model.config.digest():
            raise ValueError(
                "checkpoint model config does not match the training preset")
        self.model.load_state_arrays(checkpoint.sections["model"])
        self.disc.load_state_arrays(checkpoint.sections["disc"])
        self.opt_g.load_state_arrays(checkpoint.sections["opt_g"],
                                     step=checkpoint.step)
        self.opt_d.load_state_arrays(checkpoint.sections["opt_d"],
                                     step=checkpoint.step)
        self.state.step = checkpoint.step
        meta = checkpoint.meta
        self.state.steps_per_epoch = int(meta.get("steps_per_epoch", 1))
        if "data_rng_state" in meta:
            self.data_rng.bit_generator.state = meta["data_rng_state"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def train(config: TrainConfig, resume_from=None,
          log_fn=None) -> tuple[Trainer, list[dict]]:
    """Run to config.max_steps. Writes train_log.ndjson plus numbered
    and latest checkpoints under config.out_dir. Returns the trainer
    and the list of log records (validation records included)."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    utts = load_dataset(config.data_dir)
    train_utts, val_utts = split_train_val(utts, config.val_fraction, config.seed)
    trainer = Trainer(config)
    trainer.state.steps_per_epoch = max(1, len(train_utts) // config.batch_size)
    if resume_from is not None:
        trainer.resume(load_checkpoint(resume_from))
    records: list[dict] = []
    mode = "a" if resume_from is not None else "w"
    with open(out_dir / "train_log.ndjson", mode) as log:
        def emit(rec: dict):
            records.append(rec)
            log.write(json.dumps(rec, sort_keys=True) + "\n")
            log.flush()
            if log_fn:
                log_fn(rec)

        if resume_from is None:
            emit({"event": "config", **dataclasses.asdict(config)})
        while trainer.state.step < config.max_steps:
            batch = sample_batch(train_utts, config.crop_length,
                                 config.batch_size, trainer.data_rng)
            t0 = time.perf_counter()
            report = trainer.train_step(batch)
            step = trainer.state.step
            if step % config.log_interval == 0 or step == config.max_steps:
                emit({"event": "train_step", **report,
                      "seconds": round(time.perf_counter() - t0, 4)})
            if step % config.checkpoint_interval == 0 or step == config.max_steps:
                val = trainer.validate(val_utts)
                if val:
                    emit({"event": "validation", "step": step, **val})
                path = out_dir / f"checkpoint_{step:08d}.bvck"
                trainer.save(path)
                trainer.save(out_dir / "latest.bvck")
    return trainer, records

import numpy as np
import pytest

from bivocoder.audio import write_wav
from bivocoder.checkpoint import save_checkpoint
from bivocoder.model import BiVocoder, preset_config


def vowel_like(n: int = 16000, sr: int = 16000, seed: int = 5) -> np.ndarray:
    """Deterministic voiced test signal: four harmonics on a slow
    vibrato, 50 ms raised-cosine edges, a whisper of noise."""
    t = np.arange(n) / sr
    f0 = 120.0 + 20.0 * np.sin(2 * np.pi * 1.5 * t)
    ph = 2 * np.pi * np.cumsum(f0) / sr
    x = (0.5 * np.sin(ph) + 0.25 * np.sin(2 * ph)
         + 0.15 * np.sin(3 * ph) + 0.08 * np.sin(4 * ph))
    edge = np.minimum(np.arange(n), np.arange(n)[::-1]) / (0.05 * sr)
    env = 0.5 - 0.5 * np.cos(np.pi * np.clip(edge, 0.0, 1.0))
    rng = np.random.default_rng(seed)
    return (env * x + 0.002 * rng.standard_normal(n)).astype(np.float32)


@pytest.fixture(scope="session")
def tiny_model() -> BiVocoder:
    return BiVocoder(preset_config("tiny"), seed=3)


@pytest.fixture(scope="session")
def tiny_ckpt(tiny_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "tiny.bvck"
    save_checkpoint(path, tiny_model, step=0)
    return path


@pytest.fixture(scope="session")
def voice_wav(tmp_path_factory):
    """A half-second voiced WAV on disk."""
    path = tmp_path_factory.mktemp("wav") / "voice.wav"
    write_wav(path, vowel_like(8000))
    return path

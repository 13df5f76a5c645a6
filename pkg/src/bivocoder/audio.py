"""WAV I/O. The toolkit speaks exactly one format: 16 kHz mono 16-bit
PCM. Anything else is refused by name rather than resampled silently.
"""

from __future__ import annotations

import io
import wave
from pathlib import Path

import numpy as np

SAMPLE_RATE = 16000


class AudioError(RuntimeError):
    pass


def _read_stream(f, label: str, expected_rate) -> np.ndarray:
    try:
        with wave.open(f, "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            frames = w.getnframes()
            raw = w.readframes(frames)
    except (OSError, EOFError, wave.Error) as e:
        raise AudioError(f"{label}: cannot read WAV: {e}") from e
    if channels != 1:
        raise AudioError(f"{label}: expected mono, got {channels} channels")
    if width != 2:
        raise AudioError(f"{label}: expected 16-bit PCM, got {8 * width}-bit")
    if expected_rate is not None and rate != expected_rate:
        raise AudioError(f"{label}: expected {expected_rate} Hz, got {rate} Hz")
    if frames == 0:
        raise AudioError(f"{label}: empty file")
    return np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0


def read_wav(path, expected_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Returns float32 samples in [-1, 1)."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            return _read_stream(f, str(path), expected_rate)
    except OSError as e:
        raise AudioError(f"{path}: cannot read WAV: {e}") from e


def decode_wav(data: bytes, expected_rate: int = SAMPLE_RATE) -> np.ndarray:
    """read_wav for a WAV file already in memory."""
    return _read_stream(io.BytesIO(data), "<wav bytes>", expected_rate)


def _as_pcm(samples, label: str) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise AudioError(f"{label}: samples must be 1-d, got shape {samples.shape}")
    return np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")


def _write_stream(f, pcm: np.ndarray, rate: int) -> None:
    with wave.open(f, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm.tobytes())


def write_wav(path, samples: np.ndarray, rate: int = SAMPLE_RATE) -> None:
    pcm = _as_pcm(samples, str(path))
    with open(path, "wb") as f:
        _write_stream(f, pcm, rate)


def encode_wav(samples: np.ndarray, rate: int = SAMPLE_RATE) -> bytes:
    """write_wav into an in-memory WAV file."""
    buf = io.BytesIO()
    _write_stream(buf, _as_pcm(samples, "<wav bytes>"), rate)
    return buf.getvalue()

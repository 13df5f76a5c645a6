"""Feature file format (magic "BVF1", version 1).

Header, little-endian: magic 4s, version u16, sample_rate u32,
frame_shift u32 (waveform samples per feature frame), dim u16,
frame_count u32. Payload: float32 LE, frame-major (frame 0's dims,
then frame 1's, ...). Read-back is bit-identical to what was written.
"""

from __future__ import annotations

import struct

import numpy as np

from .model import FeatureSequence

MAGIC = b"BVF1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIHI")


class FeatureFileError(RuntimeError):
    pass


def write_feature_file(path, features: FeatureSequence) -> None:
    data = np.ascontiguousarray(features.data, dtype="<f4")
    frames, dim = data.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, features.sample_rate,
                             features.frame_shift, dim, frames))
        f.write(data.tobytes())


def read_feature_file(path) -> FeatureSequence:
    try:
        with open(path, "rb") as f:
            head = f.read(_HEADER.size)
            if len(head) != _HEADER.size:
                raise FeatureFileError(f"{path}: truncated header")
            magic, version, rate, shift, dim, frames = _HEADER.unpack(head)
            if magic != MAGIC:
                raise FeatureFileError(f"{path}: not a feature file (bad magic)")
            if version != VERSION:
                raise FeatureFileError(f"{path}: unsupported version {version}")
            payload = f.read()
    except OSError as e:
        raise FeatureFileError(f"{path}: cannot read: {e}") from e
    want = 4 * dim * frames
    if len(payload) != want:
        raise FeatureFileError(
            f"{path}: payload is {len(payload)} bytes, header promises {want}")
    data = np.frombuffer(payload, dtype="<f4").reshape(frames, dim).copy()
    return FeatureSequence(data, sample_rate=rate, frame_shift=shift)

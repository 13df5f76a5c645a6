"""Binary checkpoint container (magic "BVCK", version 1).

Layout, all little-endian:

    magic     4s   b"BVCK"
    version   u16
    digest    32s  sha256 of the canonical model-config JSON
    step      u64
    meta_len  u32, meta JSON (model config + free-form metadata)
    count     u32, then per array:
        name_len u16, name utf8
        dtype    u8 (0 = float32, 1 = float64)
        ndim     u8, dims u32 * ndim
        payload  C-order little-endian floats

Array names are namespaced "section/param.path" so model weights,
discriminator weights and optimizer moments coexist in one file.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .model import BiVocoder, ModelConfig

MAGIC = b"BVCK"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointError(RuntimeError):
    """Unreadable, truncated, or inconsistent checkpoint file."""


@dataclass
class Checkpoint:
    config: ModelConfig
    step: int
    sections: dict[str, dict[str, np.ndarray]]
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, model: BiVocoder, step: int = 0,
                    sections: dict[str, dict[str, np.ndarray]] | None = None,
                    meta: dict | None = None) -> None:
    """Write the model (section "model") plus any extra named sections."""
    all_sections = {"model": model.state_arrays()}
    for name, arrays in (sections or {}).items():
        if name == "model":
            raise ValueError('section name "model" is reserved')
        all_sections[name] = arrays
    config_dict = model.config.to_dict()
    digest = hashlib.sha256(
        json.dumps(config_dict, sort_keys=True).encode()).digest()
    meta_blob = json.dumps({"config": config_dict, "meta": meta or {}},
                           sort_keys=True).encode()
    flat: list[tuple[str, np.ndarray]] = []
    for sec, arrays in all_sections.items():
        for name, arr in arrays.items():
            flat.append((f"{sec}/{name}", np.asarray(arr)))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", VERSION))
        f.write(digest)
        f.write(struct.pack("<Q", step))
        f.write(struct.pack("<I", len(meta_blob)))
        f.write(meta_blob)
        f.write(struct.pack("<I", len(flat)))
        for name, arr in flat:
            if arr.dtype not in _DTYPE_CODES:
                raise ValueError(f"array '{name}' has unsupported dtype {arr.dtype}")
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
                    .tobytes())


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise CheckpointError(f"truncated checkpoint (wanted {n} bytes, got {len(b)})")
    return b


def load_checkpoint(path) -> Checkpoint:
    try:
        f = open(path, "rb")
    except OSError as e:
        raise CheckpointError(f"cannot open checkpoint: {e}") from e
    with f:
        if _read_exact(f, 4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<H", _read_exact(f, 2))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        digest = _read_exact(f, 32)
        (step,) = struct.unpack("<Q", _read_exact(f, 8))
        (meta_len,) = struct.unpack("<I", _read_exact(f, 4))
        try:
            blob = json.loads(_read_exact(f, meta_len))
            config = ModelConfig.from_dict(blob["config"])
        except (ValueError, KeyError, TypeError) as e:
            raise CheckpointError(f"{path}: bad metadata block: {e}") from e
        recomputed = hashlib.sha256(
            json.dumps(config.to_dict(), sort_keys=True).encode()).digest()
        if recomputed != digest:
            raise CheckpointError(f"{path}: config digest mismatch (corrupt header)")
        (count,) = struct.unpack("<I", _read_exact(f, 4))
        sections: dict[str, dict[str, np.ndarray]] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2))
            name = _read_exact(f, name_len).decode()
            code, ndim = struct.unpack("<BB", _read_exact(f, 2))
            if code not in _DTYPES:
                raise CheckpointError(f"{path}: unknown dtype code {code} for '{name}'")
            dims = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim))
            dt = _DTYPES[code]
            arr = np.frombuffer(
                _read_exact(f, dt.itemsize * int(np.prod(dims, dtype=np.int64))),
                dtype=dt).reshape(dims)
            sec, _, pname = name.partition("/")
            if not pname:
                raise CheckpointError(f"{path}: array name '{name}' lacks a section")
            sections.setdefault(sec, {})[pname] = arr.copy()
        if f.read(1):
            raise CheckpointError(f"{path}: trailing bytes after array table")
    if "model" not in sections:
        raise CheckpointError(f"{path}: missing model section")
    return Checkpoint(config=config, step=step, sections=sections,
                      meta=blob.get("meta", {}))


def load_model(path, seed: int = 0) -> tuple[BiVocoder, Checkpoint]:
    """Rebuild the model a checkpoint describes and load its weights."""
    ck = load_checkpoint(path)
    model = BiVocoder(ck.config, seed=seed)
    try:
        model.load_state_arrays(ck.sections["model"])
    except ValueError as e:
        raise CheckpointError(f"{path}: {e}") from e
    return model, ck

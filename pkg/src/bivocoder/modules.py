"""Parameter containers and layers on top of the numerics ops.

Module tracks parameters by attribute walk (insertion order, so names
are stable across runs for checkpointing and optimizer state). Weights
init U(+-1/sqrt(fan_in)), biases zero; LayerNorm/GRN get their identity
inits.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nm
from .numerics import Tensor


class Module:
    def named_parameters(self, prefix: str = ""):
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{name}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{prefix}{name}.{i}", item

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {n: p.data for n, p in self.named_parameters()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(arrays))
        extra = sorted(set(arrays) - set(own))
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={missing[:4]} "
                             f"unexpected={extra[:4]}")
        for name, p in own.items():
            a = np.asarray(arrays[name])
            if a.shape != p.data.shape:
                raise ValueError(f"shape mismatch for '{name}': "
                                 f"{a.shape} vs {p.data.shape}")
            p.data = a.astype(p.data.dtype, copy=True)

    def assert_finite(self) -> None:
        for name, p in self.named_parameters():
            if not np.isfinite(p.data).all():
                raise FloatingPointError(f"parameter '{name}' went non-finite")


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype),
                  requires_grad=True)


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, groups: int = 1,
                 dtype=np.float32):
        self.stride, self.padding, self.groups = stride, padding, groups
        self.weight = _uniform_init(rng, (c_out, c_in // groups, kernel),
                                    (c_in // groups) * kernel, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nm.conv1d(x, self.weight, self.bias, self.stride, self.padding,
                         self.groups)


class ConvTranspose1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, dtype=np.float32):
        self.stride, self.padding = stride, padding
        self.weight = _uniform_init(rng, (c_in, c_out, kernel), c_in * kernel, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nm.conv_transpose1d(x, self.weight, self.bias, self.stride,
                                   self.padding)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel, rng: np.random.Generator,
                 stride=(1, 1), padding=(0, 0), dtype=np.float32):
        kh, kw = kernel
        self.stride, self.padding = tuple(stride), tuple(padding)
        self.weight = _uniform_init(rng, (c_out, c_in, kh, kw), c_in * kh * kw, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nm.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Linear(Module):
    """Acts on the last axis: (..., c_in) -> (..., c_out)."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.weight = _uniform_init(rng, (c_in, c_out), c_in, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nm.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6, dtype=np.float32):
        self.eps = eps
        self.gamma = Tensor(np.ones(dim, dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nm.layer_norm(x, self.gamma, self.beta, self.eps)


class GRN(Module):
    """Global response normalization; zero-init gamma/beta = identity."""

    def __init__(self, dim: int, eps: float = 1e-6, dtype=np.float32):
        self.eps = eps
        self.gamma = Tensor(np.zeros(dim, dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return nm.grn(x, self.gamma, self.beta, self.eps)

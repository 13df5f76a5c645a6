"""Neural net functions used by the ConvNeXt blocks.

gelu and layer_norm are fused ops with hand-written backward passes;
grn is composed from primitives apart from a fused L2 norm whose
gradient is clamped at the origin.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .tensor import Tensor, _make, astensor, mean, mul

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian error linear unit, x * Phi(x)."""
    x = astensor(x)
    phi_cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = x.data * phi_cdf

    def bw(g):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
        return (g * (phi_cdf + x.data * pdf),)

    return _make(out.astype(x.dtype, copy=False), (x,), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis: gamma * (x - mu) / sqrt(var + eps) + beta."""
    x, gamma, beta = astensor(x), astensor(gamma), astensor(beta)
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def bw(g):
        dxhat = g * gamma.data
        gx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        axes = tuple(range(g.ndim - 1))
        return (gx.astype(x.dtype, copy=False),
                (g * xhat).sum(axis=axes),
                g.sum(axis=axes))

    return _make(out, (x, gamma, beta), bw)


def l2_norm(x: Tensor, axis: int, keepdims: bool = True) -> Tensor:
    """sqrt(sum(x^2)) over one axis; gradient x/||x||, 0 at the origin."""
    x = astensor(x)
    out = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=keepdims))

    def bw(g):
        denom = np.maximum(out, np.finfo(out.dtype).tiny)
        gn = g / denom
        if not keepdims:
            gn = np.expand_dims(gn, axis)
        return (gn * x.data,)

    return _make(out, (x,), bw)


def grn(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Global response normalization over time. x (B, T, C), gamma/beta (C,).

    Gx = ||x||_2 along T, Nx = Gx / (mean_C Gx + eps),
    out = gamma * (x * Nx) + beta + x. Zero-initialized gamma/beta make
    the op an identity at the start of training.
    """
    gx = l2_norm(x, axis=-2, keepdims=True)           # (B, 1, C)
    nx = gx / (mean(gx, axis=-1, keepdims=True) + eps)
    return mul(x, nx) * gamma + beta + x

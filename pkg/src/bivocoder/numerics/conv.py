"""1-d/2-d convolutions for the autodiff engine.

Forward paths lower to matmul (im2col) so BLAS does the work; the 1x1
stride-1 case is a plain batched matmul with no data movement. Backward
input gradients are computed as the exact adjoint: zero-stuff the output
gradient by the stride and full-correlate with the flipped kernel.

Weight layouts follow the usual deep-learning conventions:
  conv1d            w (c_out, c_in // groups, k)
  conv_transpose1d  w (c_in, c_out, k)
  conv2d            w (c_out, c_in, kh, kw)
so conv_transpose1d(y, w) is the adjoint of conv1d(x, w) with the same w.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Array, Tensor, _make, astensor


def _out_len(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _windows1d(xp: Array, k: int, stride: int, count: int) -> Array:
    """xp (B, C, Tp) -> strided view (B, C, count, k), no copy."""
    v = sliding_window_view(xp, k, axis=2)
    return v[:, :, : stride * (count - 1) + 1 : stride]

# ---- raw cores (plain ndarrays) ---------------------------------------------


def _conv1d_fwd(x: Array, w: Array, b: Array | None, stride: int, pad: int,
                groups: int) -> Array:
    B, Ci, T = x.shape
    Co, Cig, K = w.shape
    if Ci % groups or Co % groups or Cig != Ci // groups:
        raise ValueError(f"conv1d: channels {Ci}->{Co} not divisible by groups={groups}")
    To = _out_len(T, K, stride, pad)
    if To <= 0:
        raise ValueError(f"conv1d: input length {T} too short for kernel {K}")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
    if groups == 1:
        if K == 1:
            out = np.matmul(w[:, :, 0], xp[:, :, ::stride][:, :, :To])
        else:
            cols = (_windows1d(xp, K, stride, To)
                    .transpose(0, 2, 1, 3).reshape(B * To, Ci * K))
            out = (cols @ w.reshape(Co, Ci * K).T).reshape(B, To, Co).transpose(0, 2, 1)
    elif groups == Ci and Co == Ci:
        # depthwise, multiplier 1
        out = np.zeros((B, Ci, To), dtype=x.dtype)
        for k in range(K):
            out += w[:, 0, k][:, None] * xp[:, :, k : k + stride * To : stride]
    else:
        gs_i, gs_o = Ci // groups, Co // groups
        out = np.concatenate(
            [_conv1d_fwd(xp[:, g * gs_i:(g + 1) * gs_i], w[g * gs_o:(g + 1) * gs_o],
                         None, stride, 0, 1) for g in range(groups)], axis=1)
    if b is not None:
        out = out + b[:, None]
    return out


def _conv1d_dx(g: Array, w: Array, stride: int, pad: int, groups: int,
               x_shape) -> Array:
    B, Ci, T = x_shape
    Co, Cig, K = w.shape
    To = g.shape[2]
    # zero-stuff by stride, then full correlation with the flipped kernel
    gu = np.zeros((B, Co, stride * (To - 1) + 1), dtype=g.dtype)
    gu[:, :, ::stride] = g
    if groups == 1:
        wt = np.ascontiguousarray(w[:, :, ::-1].transpose(1, 0, 2))  # (Ci, Co, K)
        full = _conv1d_fwd(gu, wt, None, 1, K - 1, 1)  # (B, Ci, stride*(To-1)+K)
    elif groups == Ci and Co == Ci:
        full = np.zeros((B, Ci, stride * (To - 1) + K), dtype=g.dtype)
        for k in range(K):
            full[:, :, k : k + stride * (To - 1) + 1 : stride] += w[:, 0, k][:, None] * g
    else:
        gs_i, gs_o = Ci // groups, Co // groups
        full = np.concatenate(
            [_conv1d_dx(gu[:, gidx * gs_o:(gidx + 1) * gs_o], w[gidx * gs_o:(gidx + 1) * gs_o],
                        1, 0, 1, (B, gs_i, stride * (To - 1) + K))
             for gidx in range(groups)], axis=1)
    dxp = np.zeros((B, Ci, T + 2 * pad), dtype=g.dtype)
    dxp[:, :, : full.shape[2]] = full
    return dxp[:, :, pad : pad + T]


def _conv1d_dw(g: Array, x: Array, stride: int, pad: int, groups: int,
               w_shape) -> Array:
    B, Ci, T = x.shape
    Co, Cig, K = w_shape
    To = g.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
    if groups == 1:
        if K == 1:
            xs = xp[:, :, ::stride][:, :, :To]
            return np.matmul(g, xs.transpose(0, 2, 1)).sum(0)[:, :, None]
        cols = (_windows1d(xp, K, stride, To)
                .transpose(0, 2, 1, 3).reshape(B * To, Ci * K))
        gm = g.transpose(0, 2, 1).reshape(B * To, Co)
        return (gm.T @ cols).reshape(Co, Ci, K)
    if groups == Ci and Co == Ci:
        dw = np.zeros((Ci, 1, K), dtype=g.dtype)
        for k in range(K):
            dw[:, 0, k] = (g * xp[:, :, k : k + stride * To : stride][:, :, :To]).sum((0, 2))
        return dw
    gs_i, gs_o = Ci // groups, Co // groups
    return np.concatenate(
        [_conv1d_dw(g[:, gidx * gs_o:(gidx + 1) * gs_o], xp[:, gidx * gs_i:(gidx + 1) * gs_i],
                    stride, 0, 1, (gs_o, gs_i, K)) for gidx in range(groups)], axis=0)


# ---- autodiff wrappers -------------------------------------------------------


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1,
           padding: int = 0, groups: int = 1) -> Tensor:
    """x (B, c_in, T), w (c_out, c_in/groups, k) -> (B, c_out, T_out)."""
    x, w = astensor(x), astensor(w)
    parents = (x, w) if b is None else (x, w, astensor(b))
    bd = parents[2].data if b is not None else None
    out = _conv1d_fwd(x.data, w.data, bd, stride, padding, groups)

    def bw(g):
        gx = _conv1d_dx(g, w.data, stride, padding, groups, x.shape) \
            if x.requires_grad else None
        gw = _conv1d_dw(g, x.data, stride, padding, groups, w.shape) \
            if w.requires_grad else None
        if b is None:
            return gx, gw
        return gx, gw, g.sum((0, 2))

    return _make(out, parents, bw)


def conv_transpose1d(x: Tensor, w: Tensor, b: Tensor | None = None,
                     stride: int = 1, padding: int = 0) -> Tensor:
    """x (B, c_in, T), w (c_in, c_out, k) -> (B, c_out, (T-1)*stride + k - 2*padding).

    Exact adjoint of conv1d with the same weight tensor.
    """
    x, w = astensor(x), astensor(w)
    parents = (x, w) if b is None else (x, w, astensor(b))
    bd = parents[2].data if b is not None else None
    B, Ci, T = x.shape
    Ciw, Co, K = w.shape
    if Ciw != Ci:
        raise ValueError(f"conv_transpose1d: input {Ci} channels, weight expects {Ciw}")
    # _conv1d_dx scatters x through w exactly as the conv1d adjoint does;
    # (c_in, c_out, k) is already the layout it wants for that direction.
    out_full = _conv1d_dx(x.data, w.data, stride, 0, 1,
                          (B, Co, stride * (T - 1) + K))
    out = out_full[:, :, padding : out_full.shape[2] - padding] if padding else out_full
    if bd is not None:
        out = out + bd[:, None]

    def bw(g):
        # dX: correlate the padded output grad with w read as (out=c_in, in=c_out, k)
        gx = _conv1d_fwd(g, w.data, None, stride, padding, 1) if x.requires_grad else None
        gw = None
        if w.requires_grad:
            gp = np.pad(g, ((0, 0), (0, 0), (padding, padding))) if padding else g
            gw = np.empty_like(w.data)
            for k in range(K):
                seg = gp[:, :, k : k + stride * T : stride][:, :, :T]
                gw[:, :, k] = np.matmul(x.data, seg.transpose(0, 2, 1)).sum(0)
        if b is None:
            return gx, gw
        return gx, gw, g.sum((0, 2))

    return _make(out, parents, bw)


def _windows2d(xp: Array, kh: int, kw: int, sh: int, sw: int,
               ho: int, wo: int) -> Array:
    v = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return v[:, :, : sh * (ho - 1) + 1 : sh, : sw * (wo - 1) + 1 : sw]


def _conv2d_fwd(x: Array, w: Array, b: Array | None, stride, pad) -> Array:
    B, Ci, H, W = x.shape
    Co, _, Kh, Kw = w.shape
    sh, sw = stride
    ph, pw = pad
    Ho, Wo = _out_len(H, Kh, sh, ph), _out_len(W, Kw, sw, pw)
    if Ho <= 0 or Wo <= 0:
        raise ValueError(f"conv2d: input {H}x{W} too short for kernel {Kh}x{Kw}")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    cols = (_windows2d(xp, Kh, Kw, sh, sw, Ho, Wo)
            .transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, Ci * Kh * Kw))
    out = (cols @ w.reshape(Co, -1).T).reshape(B, Ho, Wo, Co).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b[:, None, None]
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride=(1, 1),
           padding=(0, 0)) -> Tensor:
    """x (B, c_in, H, W), w (c_out, c_in, kh, kw) -> (B, c_out, H_out, W_out)."""
    x, w = astensor(x), astensor(w)
    parents = (x, w) if b is None else (x, w, astensor(b))
    bd = parents[2].data if b is not None else None
    sh, sw = stride
    ph, pw = padding
    out = _conv2d_fwd(x.data, w.data, bd, (sh, sw), (ph, pw))
    B, Ci, H, W = x.shape
    Co, _, Kh, Kw = w.shape
    Ho, Wo = out.shape[2], out.shape[3]

    def bw(g):
        gx = gw = None
        if x.requires_grad:
            gu = np.zeros((B, Co, sh * (Ho - 1) + 1, sw * (Wo - 1) + 1), dtype=g.dtype)
            gu[:, :, ::sh, ::sw] = g
            wt = np.ascontiguousarray(w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            full = _conv2d_fwd(gu, wt, None, (1, 1), (Kh - 1, Kw - 1))
            dxp = np.zeros((B, Ci, H + 2 * ph, W + 2 * pw), dtype=g.dtype)
            dxp[:, :, : full.shape[2], : full.shape[3]] = full
            gx = dxp[:, :, ph : ph + H, pw : pw + W]
        if w.requires_grad:
            xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x.data
            cols = (_windows2d(xp, Kh, Kw, sh, sw, Ho, Wo)
                    .transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, Ci * Kh * Kw))
            gm = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, Co)
            gw = (gm.T @ cols).reshape(Co, Ci, Kh, Kw)
        if b is None:
            return gx, gw
        return gx, gw, g.sum((0, 2, 3))

    return _make(out, parents, bw)

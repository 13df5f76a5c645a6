"""Real FFT ops for the autodiff graph.

Complex values travel through the graph as a stacked (..., 2, F) real
axis (index 0 real, index 1 imaginary); scipy.fft does the transform
work and preserves float32.

Adjoint derivations, with theta = 2*pi*k*n/N and F = N//2 + 1 bins:

rfft forward  X[k] = sum_n x[n] e^{-i theta}. For an upstream gradient
G[k] = ga + i*gb on the stacked output, dL/dx[n] = Re sum_k G[k] e^{+i theta}
with no conjugate-symmetric doubling. irfft reconstructs
(1/N)(Re H[0] + 2 sum_interior Re(H[k] e^{i theta}) + Re H[N/2] (-1)^n),
so the adjoint is N * irfft(H) with interior bins halved. Imaginary
parts of G at DC/Nyquist correspond to structurally zero outputs and
drop out (irfft ignores them, which matches).

irfft forward x[n] = (1/N)(...) as above, treating the imaginary parts
of Z[0] and Z[N/2] as absent. The adjoint of a gradient g over x is
(2/N) * rfft(g) with bins 0 and N/2 scaled by 1/2 and their imaginary
parts zeroed (those inputs never influenced the output).
"""

from __future__ import annotations

import numpy as np
import scipy.fft

from .tensor import Tensor, _make, astensor


def rfft_stacked(x: Tensor, nfft: int) -> Tensor:
    """x (..., L) real with L <= nfft (zero-padded) -> (..., 2, nfft//2+1)."""
    x = astensor(x)
    L = x.shape[-1]
    if L > nfft:
        raise ValueError(f"rfft_stacked: frame length {L} exceeds fft size {nfft}")
    z = scipy.fft.rfft(x.data, n=nfft, axis=-1)
    out = np.stack([z.real, z.imag], axis=-2)

    def bw(g):
        G = g[..., 0, :] + 1j * g[..., 1, :]
        G[..., 1:-1] *= 0.5
        gx = nfft * scipy.fft.irfft(G, n=nfft, axis=-1)
        return (np.ascontiguousarray(gx[..., :L]),)

    return _make(out, (x,), bw)


def irfft_stacked(z: Tensor, nfft: int) -> Tensor:
    """z (..., 2, nfft//2+1) stacked complex -> real (..., nfft)."""
    z = astensor(z)
    if z.shape[-1] != nfft // 2 + 1 or z.shape[-2] != 2:
        raise ValueError(f"irfft_stacked: expected (..., 2, {nfft // 2 + 1}), got {z.shape}")
    Z = z.data[..., 0, :] + 1j * z.data[..., 1, :]
    out = scipy.fft.irfft(Z, n=nfft, axis=-1)

    def bw(g):
        G = scipy.fft.rfft(g, n=nfft, axis=-1)
        G *= 2.0 / nfft
        G[..., 0] *= 0.5
        G[..., -1] *= 0.5
        gz = np.stack([G.real, G.imag], axis=-2)
        gz[..., 1, 0] = 0.0
        gz[..., 1, -1] = 0.0
        return (gz.astype(z.dtype, copy=False),)

    return _make(out, (z,), bw)


def complex_abs(re: Tensor, im: Tensor) -> Tensor:
    """sqrt(re^2 + im^2) with the gradient clamped at the origin."""
    re, im = astensor(re), astensor(im)
    out = np.hypot(re.data, im.data)

    def bw(g):
        safe = np.maximum(out, np.finfo(out.dtype).tiny)
        return g * re.data / safe, g * im.data / safe

    return _make(out, (re, im), bw)

"""Minimal reverse-mode autodiff engine on numpy arrays."""

from .tensor import (
    Tensor,
    abs_,
    add,
    arctan2,
    astensor,
    backward,
    concat,
    cos,
    div,
    exp,
    gather_last,
    getitem,
    grad_enabled,
    leaky_relu,
    log,
    matmul,
    maximum,
    mean,
    minimum,
    mul,
    no_grad,
    pad_constant,
    power,
    relu,
    reshape,
    round_,
    scatter_add_last,
    sin,
    sqrt,
    sub,
    sum_,
    transpose,
)
from .conv import conv1d, conv2d, conv_transpose1d
from .functional import gelu, grn, l2_norm, layer_norm
from .gradcheck import GradCheckReport, check_gradients, finite_difference_grad
from .optim import AdamW, AdamWConfig, AdamWState, NonFiniteGradError, adamw_step
from .spectral import complex_abs, irfft_stacked, rfft_stacked

__all__ = [
    "AdamW", "AdamWConfig", "AdamWState", "NonFiniteGradError", "Tensor",
    "abs_", "adamw_step", "add", "arctan2", "astensor", "backward",
    "GradCheckReport", "check_gradients", "complex_abs", "concat", "conv1d", "conv2d",
    "conv_transpose1d", "cos", "div", "exp", "finite_difference_grad",
    "gather_last", "gelu", "getitem", "grad_enabled", "grn", "irfft_stacked",
    "l2_norm", "layer_norm", "leaky_relu", "log", "matmul", "maximum",
    "mean", "minimum", "mul", "no_grad", "pad_constant", "power", "relu",
    "reshape", "rfft_stacked", "round_", "scatter_add_last", "sin", "sqrt",
    "sub", "sum_", "transpose",
]

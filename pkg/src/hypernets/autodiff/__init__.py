"""Minimal reverse-mode automatic differentiation over float64 tensors."""

from .gradcheck import analytic_grads, grad_check, numeric_grads, relative_error, sample_coords
from .ops import (
    add,
    apply_activation,
    concat,
    conv2d,
    conv2d_transpose,
    conv_geometry,
    hadamard,
    matmul,
    mse_loss,
    reshape,
    softmax,
    sum,
    transpose,
)
from .tape import ContractError, DimensionError, Tape, Tensor, backward, const

__all__ = [
    "ContractError",
    "DimensionError",
    "Tape",
    "Tensor",
    "add",
    "analytic_grads",
    "apply_activation",
    "backward",
    "concat",
    "const",
    "conv2d",
    "conv2d_transpose",
    "conv_geometry",
    "grad_check",
    "hadamard",
    "matmul",
    "mse_loss",
    "numeric_grads",
    "relative_error",
    "reshape",
    "sample_coords",
    "softmax",
    "sum",
    "transpose",
]

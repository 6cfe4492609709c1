"""Minimal reverse-mode autodiff over dense float64 arrays."""

from .conv import ConfigurationError, conv2d, conv_output_size, deconv2d, deconv_output_size
from .gradcheck import grad_check, numerical_grad
from .tensor import (
    ContractError,
    DimensionError,
    Tensor,
    add,
    add_bias,
    add_channel_bias,
    add_scalar,
    as_tensor,
    apply_activation,
    backward,
    exp,
    linear,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    parameter,
    relu,
    reshape,
    scale,
    sigmoid,
    softplus,
    split_cols,
    square,
    sub,
    sum,
    sum_rows,
    tanh,
    zero_grads,
)

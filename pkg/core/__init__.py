from core.tensor import (
    Tensor,
    ComputationGraph,
    DimensionError,
    GraphUsageError,
    as_tensor,
    backward,
    no_grad,
    is_grad_enabled,
    elementwise,
    add,
    sub,
    mul,
    scale,
    relu,
    clamp,
    sign,
    sin,
    cos,
    matmul,
    linear,
    spmm,
    reshape,
    expand,
    concat,
    stack,
    reduce_sum,
    mean,
    mse,
)
from core.conv import conv2d
from core.optim import Adam, AdamState, OptimizerError, adam_step
from core.gradcheck import check_gradient, numerical_gradient, relative_error

__all__ = [
    "Tensor",
    "ComputationGraph",
    "DimensionError",
    "GraphUsageError",
    "as_tensor",
    "backward",
    "no_grad",
    "is_grad_enabled",
    "elementwise",
    "add",
    "sub",
    "mul",
    "scale",
    "relu",
    "clamp",
    "sign",
    "sin",
    "cos",
    "matmul",
    "linear",
    "spmm",
    "reshape",
    "expand",
    "concat",
    "stack",
    "reduce_sum",
    "mean",
    "mse",
    "conv2d",
    "Adam",
    "AdamState",
    "OptimizerError",
    "adam_step",
    "check_gradient",
    "numerical_gradient",
    "relative_error",
]

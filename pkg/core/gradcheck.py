"""
Central finite-difference gradient checks.
"""
from typing import Callable

import numpy as np

from core.tensor import Tensor, backward

FD_STEP = 1e-5


def numerical_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = fn(x)
        flat[i] = original - step
        minus = fn(x)
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def check_gradient(fn: Callable[[Tensor], Tensor], x: np.ndarray, step: float = FD_STEP) -> float:
    """Relative error between backward() and finite differences of a scalar-valued fn."""
    leaf = Tensor(x, requires_grad=True)
    backward(fn(leaf))
    numeric = numerical_gradient(lambda v: fn(Tensor(v)).item(), x, step)
    return relative_error(leaf.grad, numeric)

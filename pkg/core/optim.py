"""
Adam optimizer used for policy training.
"""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from core.tensor import Tensor


class OptimizerError(Exception):
    """Raised when parameters, gradients and optimizer state disagree in shape."""
    pass


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one bias-corrected Adam update in place and advance the step counter."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise OptimizerError(
            f"Adam got {len(params)} params, {len(grads)} grads, {len(state.m)} moment slots"
        )
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not (p.shape == np.shape(g) == m.shape == v.shape):
            raise OptimizerError(f"Adam shape mismatch: param {p.shape}, grad {np.shape(g)}, moment {m.shape}")

    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


class Adam:
    """Adam over a fixed parameter list, reading gradients from `param.grad`."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state,
                  self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

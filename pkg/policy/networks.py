"""
Vision encoder and conditional noise-prediction network.
"""
import math
from typing import Sequence

import numpy as np

from core import DimensionError, Tensor, concat, conv2d, cos, linear, mean, relu, reshape, sin

KERNEL = 4
STRIDE = 2
PAD = 1


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Tensor:
    return Tensor(rng.standard_normal(shape) * math.sqrt(2.0 / fan_in), requires_grad=True)


def sinusoidal_embedding(k, count: int, dim: int) -> Tensor:
    """
    Fixed sin/cos embedding of diffusion step indices.

    `k` is a scalar step (shared by all `count` rows) or one step per row.
    """
    half = dim // 2
    steps = np.broadcast_to(np.asarray(k, dtype=np.float64).reshape(-1), (count,)).reshape(count, 1)
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    phase = Tensor(steps * freqs[None, :])
    return concat([sin(phase), cos(phase)], axis=1)


class VisionEncoder:
    """
    Strided conv stack with global average pooling.

    Input frames are (n, channels, size, size); every layer halves the
    spatial extent with a 4x4 kernel, stride 2 and padding 1.
    """

    def __init__(self, in_channels: int, channels: Sequence[int], rng: np.random.Generator):
        self.kernels: list[Tensor] = []
        self.biases: list[Tensor] = []
        c_in = in_channels
        for c_out in channels:
            self.kernels.append(he_normal(rng, (c_out, c_in, KERNEL, KERNEL), c_in * KERNEL * KERNEL))
            self.biases.append(Tensor(np.zeros(c_out), requires_grad=True))
            c_in = c_out
        self.in_channels = in_channels
        self.out_dim = c_in

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for i, (w, b) in enumerate(zip(self.kernels, self.biases)):
            params[f"encoder.conv{i}.weight"] = w
            params[f"encoder.conv{i}.bias"] = b
        return params

    def __call__(self, frames: Tensor) -> Tensor:
        if frames.ndim != 4 or frames.shape[1] != self.in_channels:
            raise DimensionError(f"encoder expects (n, {self.in_channels}, h, w) frames, got {frames.shape}")
        x = frames
        for w, b in zip(self.kernels, self.biases):
            x = relu(conv2d(x, w, stride=STRIDE, pad=PAD, bias=b))
        return mean(x, axis=(2, 3))


class ConditionalDenoiser:
    """
    MLP noise predictor: [flattened noisy trajectory, condition, step embedding] -> noise.

    Implements the `Denoiser` protocol, so it can be handed to the samplers.
    """

    def __init__(self, horizon: int, action_dim: int, cond_dim: int, time_dim: int,
                 hidden: int, rng: np.random.Generator):
        self.horizon = horizon
        self.action_dim = action_dim
        self.cond_dim = cond_dim
        self.time_dim = time_dim
        traj_dim = horizon * action_dim
        widths = [traj_dim + cond_dim + time_dim, hidden, hidden, traj_dim]
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            self.weights.append(he_normal(rng, (fan_in, fan_out), fan_in))
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"denoiser.fc{i}.weight"] = w
            params[f"denoiser.fc{i}.bias"] = b
        return params

    def predict(self, x_k: Tensor, k, cond: Tensor) -> Tensor:
        if x_k.ndim != 3 or x_k.shape[1:] != (self.horizon, self.action_dim):
            raise DimensionError(
                f"denoiser expects (n, {self.horizon}, {self.action_dim}) trajectories, got {x_k.shape}"
            )
        n = x_k.shape[0]
        if cond.shape != (n, self.cond_dim):
            raise DimensionError(f"denoiser expects condition ({n}, {self.cond_dim}), got {cond.shape}")
        h = concat([
            reshape(x_k, (n, self.horizon * self.action_dim)),
            cond,
            sinusoidal_embedding(k, n, self.time_dim),
        ], axis=1)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = linear(h, w, b)
            if i < last:
                h = relu(h)
        return reshape(h, x_k.shape)

"""
2-D cross-correlation for the vision encoder.
"""
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import as_strided

from core.tensor import DimensionError, Tensor


def conv_output_extent(size: int, kernel: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - kernel
    if span < 0 or span % stride != 0:
        raise DimensionError(
            f"conv2d: extent {size} with kernel {kernel}, stride {stride}, pad {pad} "
            "does not give an integer output size"
        )
    return span // stride + 1


def _windows(padded: np.ndarray, kh: int, kw: int, oh: int, ow: int, stride: int) -> np.ndarray:
    n, c = padded.shape[:2]
    s = padded.strides
    return as_strided(
        padded,
        shape=(n, c, kh, kw, oh, ow),
        strides=(s[0], s[1], s[2], s[3], s[2] * stride, s[3] * stride),
        writeable=False,
    )


def conv2d(
    x: Tensor,
    kernel: Tensor,
    stride: int = 1,
    pad: int = 0,
    bias: Optional[Tensor] = None,
) -> Tensor:
    """
    Cross-correlate x with kernel.

    Args:
        x: input of shape (c_in, h, w) or batched (n, c_in, h, w)
        kernel: weights of shape (c_out, c_in, kh, kw)
        stride: step between windows
        pad: zero padding on each spatial border
        bias: optional per-output-channel offset of shape (c_out,)

    Returns:
        Tensor of shape (c_out, h', w') or (n, c_out, h', w')
        with h' = (h + 2*pad - kh) / stride + 1
    """
    batched = x.ndim == 4
    if x.ndim not in (3, 4) or kernel.ndim != 4:
        raise DimensionError(f"conv2d: expected (n,)c,h,w input and 4-D kernel, got {x.shape} and {kernel.shape}")
    data = x.data if batched else x.data[None]
    n, c, h, w = data.shape
    c_out, c_in, kh, kw = kernel.shape
    if c != c_in:
        raise DimensionError(f"conv2d: input has {c} channels, kernel expects {c_in}")
    if bias is not None and bias.shape != (c_out,):
        raise DimensionError(f"conv2d: bias shape {bias.shape} does not match {c_out} output channels")
    oh = conv_output_extent(h, kh, stride, pad)
    ow = conv_output_extent(w, kw, stride, pad)

    padded = np.pad(data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _windows(padded, kh, kw, oh, ow, stride)
    out = np.tensordot(cols, kernel.data, axes=([1, 2, 3], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    if not batched:
        out = out[0]

    def _backward(g: np.ndarray):
        g4 = g if batched else g[None]
        grad_kernel = np.tensordot(g4, cols, axes=([0, 2, 3], [0, 4, 5]))
        grad_cols = np.tensordot(g4, kernel.data, axes=([1], [0]))  # n, oh, ow, c, kh, kw
        grad_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += (
                    grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        grad_x = grad_padded[:, :, pad:pad + h, pad:pad + w]
        if not batched:
            grad_x = grad_x[0]
        grads = (grad_x, grad_kernel)
        if bias is not None:
            grads += (g4.sum(axis=(0, 2, 3)),)
        return grads

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor._from_op(out, "conv2d", inputs, _backward)

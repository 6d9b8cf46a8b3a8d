"""
Convolution Kernels

2-D cross-correlation over (N, C, H, W) batches, written as a sum over
kernel taps of strided slices contracted with BLAS (tensordot). The
backward pass reuses the same slices.
"""

from typing import Optional, Tuple, Union

import numpy as np

from .errors import ShapeMismatchError
from .layers import ConvLayer
from .tape import Var, apply, lift


def _tap(kernel_offset: int, stride: int, count: int) -> slice:
    return slice(kernel_offset, kernel_offset + stride * count, stride)


def _check_shapes(x: np.ndarray, w: np.ndarray) -> None:
    if x.ndim != 4:
        raise ShapeMismatchError(f"conv input must be (N, C, H, W), got shape {x.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatchError(f"conv input has {x.shape[1]} channels, weights expect {w.shape[1]}")


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    _check_shapes(x, w)
    n, _, h, wd = x.shape
    out_ch, _, kh, kw = w.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatchError(f"kernel {kh}x{kw} larger than padded input {h}x{wd}")

    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    out = np.zeros((n, out_ch, ho, wo))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, _tap(i, stride, ho), _tap(j, stride, wo)]
            out += np.tensordot(patch, w[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
    return out


def conv2d_backward(
    g: np.ndarray, x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients (dx, dw) of a conv2d_forward output gradient g"""
    _, _, h, wd = x.shape
    _, _, kh, kw = w.shape
    ho, wo = g.shape[2:]

    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for i in range(kh):
        for j in range(kw):
            rows, cols = _tap(i, stride, ho), _tap(j, stride, wo)
            patch = xp[:, :, rows, cols]
            dw[:, :, i, j] = np.tensordot(g, patch, axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, rows, cols] += np.tensordot(g, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
    dx = dxp[:, :, padding : padding + h, padding : padding + wd]
    return dx, dw


def conv2d_op(
    x: Union[Var, np.ndarray],
    w: Union[Var, np.ndarray],
    b: Optional[Union[Var, np.ndarray]] = None,
    stride: int = 1,
    padding: int = 0,
) -> Var:
    """Traced convolution of a (N, C, H, W) batch"""
    xv, wv = lift(x), lift(w)
    out = conv2d_forward(xv.value, wv.value, stride, padding)

    def backward(g: np.ndarray) -> tuple:
        dx, dw = conv2d_backward(g, xv.value, wv.value, stride, padding)
        return dx if xv.requires_grad else None, dw

    result = apply(out, (xv, wv), backward)
    if b is None:
        return result
    bv = lift(b)
    return result + bv.reshape(1, -1, 1, 1)


def conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """
    Cross-correlation of a C x H x W grid (or an N x C x H x W batch)
    with the layer's weights, stride and padding.

    Raises:
        ShapeMismatchError: channel counts differ or the kernel does not fit
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 3
    batch = x[None] if single else x
    out = conv2d_forward(batch, layer.weight, layer.stride, layer.padding)
    if layer.bias is not None:
        out = out + layer.bias[None, :, None, None]
    return out[0] if single else out

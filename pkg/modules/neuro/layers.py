"""
Layers

Parameter containers for convolution and fully-connected layers, plus their
initializers: weights ~ uniform(+-1/sqrt(fan_in)), biases zero.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True, eq=False)
class ConvLayer:
    """Cross-correlation weights (out, in, kh, kw) with stride and zero padding"""
    weight: np.ndarray
    stride: int = 1
    padding: int = 0
    bias: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.weight.ndim != 4:
            raise ShapeMismatchError(f"conv weight must be 4-D, got shape {self.weight.shape}")
        if self.bias is not None and self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError(f"conv bias shape {self.bias.shape} does not match {self.weight.shape[0]} outputs")
        if self.stride < 1 or self.padding < 0:
            raise ShapeMismatchError(f"invalid stride {self.stride} / padding {self.padding}")
        if not np.all(np.isfinite(self.weight)):
            raise ShapeMismatchError("conv weights must be finite")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]

    def output_shape(self, height: int, width: int) -> tuple:
        kh, kw = self.weight.shape[2:]
        return (
            (height + 2 * self.padding - kh) // self.stride + 1,
            (width + 2 * self.padding - kw) // self.stride + 1,
        )


@dataclass(frozen=True, eq=False)
class Linear:
    """Fully-connected weights (in, out) and bias (out,)"""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeMismatchError(f"linear shapes {self.weight.shape} / {self.bias.shape} inconsistent")


def init_conv(
    rng: np.random.Generator,
    out_channels: int,
    in_channels: int,
    kernel: int,
    stride: int = 1,
    padding: int = 0,
    bias: bool = False,
) -> ConvLayer:
    bound = 1.0 / math.sqrt(in_channels * kernel * kernel)
    weight = rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel, kernel))
    return ConvLayer(weight, stride, padding, np.zeros(out_channels) if bias else None)


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int) -> Linear:
    bound = 1.0 / math.sqrt(fan_in)
    return Linear(rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out))

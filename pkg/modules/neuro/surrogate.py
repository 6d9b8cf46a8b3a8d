"""
Surrogate Gradients

The spike nonlinearity is a Heaviside step of z = u / v_th - 1, whose
derivative is zero almost everywhere. Training substitutes a bounded
surrogate; each surrogate also has a primitive so the surrogate-smoothed
forward graph (used by gradient checks) can be evaluated.
"""

from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np
from scipy.special import expit

from .errors import NeuroError
from .tape import Var, apply, lift


class Surrogate(Protocol):
    def grad(self, z: np.ndarray) -> np.ndarray: ...

    def primitive(self, z: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Triangle:
    """max(0, 1 - |z| / width); peak 1 at z = 0"""
    width: float = 1.0

    def grad(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, 1.0 - np.abs(z) / self.width)

    def primitive(self, z: np.ndarray) -> np.ndarray:
        w = self.width
        z = np.clip(np.asarray(z, dtype=np.float64), -w, w)
        return np.where(z <= 0, (z + w) ** 2 / (2 * w), w / 2 + z - z * z / (2 * w))


@dataclass(frozen=True)
class Logistic:
    """Derivative of width * sigmoid(4 z / width); peak 1 at z = 0"""
    width: float = 1.0

    def grad(self, z: np.ndarray) -> np.ndarray:
        s = expit(4.0 * np.asarray(z, dtype=np.float64) / self.width)
        return 4.0 * s * (1.0 - s)

    def primitive(self, z: np.ndarray) -> np.ndarray:
        return self.width * expit(4.0 * np.asarray(z, dtype=np.float64) / self.width)


SURROGATES = {"triangle": Triangle, "logistic": Logistic}


def make_surrogate(shape: str = "triangle", width: float = 1.0) -> Surrogate:
    if shape not in SURROGATES:
        raise NeuroError(f"unknown surrogate {shape!r}, expected one of {sorted(SURROGATES)}")
    if not width > 0:
        raise NeuroError(f"surrogate width must be positive, got {width}")
    return SURROGATES[shape](width)


def surrogate_spike_grad(z: Union[float, np.ndarray], width: float = 1.0, shape: str = "triangle") -> np.ndarray:
    """Surrogate derivative of the spike step at z"""
    return make_surrogate(shape, width).grad(np.asarray(z, dtype=np.float64))


def heaviside(z: np.ndarray) -> np.ndarray:
    return (np.asarray(z) > 0).astype(np.float64)


def spike(z: Union[Var, np.ndarray], surrogate: Surrogate, smooth: bool = False) -> Var:
    """
    Traced spike op.

    Forward is the exact step (binary spikes), or the surrogate's primitive
    when smooth is set; backward is always the surrogate derivative.
    """
    zv = lift(z)
    out = surrogate.primitive(zv.value) if smooth else heaviside(zv.value)
    return apply(out, (zv,), lambda g: (g * surrogate.grad(zv.value),))

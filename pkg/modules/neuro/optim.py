"""
Optimizers

Plain and momentum SGD over named parameter arrays. After each update
the LIF threshold and leak are clamped back into their valid ranges.
"""

import math
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .errors import NeuroError, NonFiniteGradientError

Params = Dict[str, np.ndarray]
Clamps = Mapping[str, Tuple[float, float]]

DEFAULT_CLAMPS: Clamps = {
    "v_th": (1e-3, math.inf),
    "leak": (0.0, 1.0),
}


def _check_finite(grads: Mapping[str, np.ndarray]) -> None:
    for name in sorted(grads):
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteGradientError(name)


def sgd_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    lr: float,
    clamps: Optional[Clamps] = None,
) -> Params:
    """
    p <- p - lr * g, then clamp.

    Parameters without a gradient are carried over unchanged.

    Raises:
        NonFiniteGradientError: a gradient holds NaN or infinity
        NeuroError: lr is not positive
    """
    if not lr > 0:
        raise NeuroError(f"learning rate must be positive, got {lr}")
    _check_finite(grads)
    clamps = DEFAULT_CLAMPS if clamps is None else clamps

    updated: Params = {}
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        if name in grads:
            value = value - lr * np.asarray(grads[name], dtype=np.float64)
        if name in clamps:
            lo, hi = clamps[name]
            value = np.clip(value, lo, hi)
        updated[name] = value
    return updated


class Optimizer:
    """SGD with heavy-ball momentum; momentum 0 is exactly sgd_step"""

    def __init__(self, lr: float, momentum: float = 0.0, clamps: Optional[Clamps] = None):
        if not 0.0 <= momentum < 1.0:
            raise NeuroError(f"momentum must lie in [0, 1), got {momentum}")
        if not lr > 0:
            raise NeuroError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.momentum = momentum
        self.clamps = clamps
        self._velocity: Params = {}

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> Params:
        _check_finite(grads)
        if self.momentum == 0.0:
            return sgd_step(params, grads, self.lr, self.clamps)

        for name, g in grads.items():
            previous = self._velocity.get(name)
            self._velocity[name] = g if previous is None else self.momentum * previous + g
        return sgd_step(params, {name: self._velocity[name] for name in grads}, self.lr, self.clamps)

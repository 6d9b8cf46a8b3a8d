"""
Leaky Integrate-and-Fire Dynamics

    u_t = leak * u_{t-1} + I_t - v_th * o_{t-1}
    z_t = u_t / v_th - 1
    o_t = 1 if z_t > 0 else 0

The reset subtracts the threshold on the step after a spike (soft reset).
lif_step is the plain numpy form; lif_update records the same step on a
tape with the surrogate gradient standing in for the spike derivative.
"""

from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np

from .errors import NeuroError, ShapeMismatchError
from .surrogate import Surrogate, heaviside, spike
from .tape import Var, lift


@dataclass(frozen=True, eq=False)
class LifLayerState:
    u: np.ndarray
    v_th: float = 1.0
    leak: float = 0.9
    o_prev: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        object.__setattr__(self, "u", u)
        if self.o_prev is None:
            object.__setattr__(self, "o_prev", np.zeros_like(u))
        else:
            o_prev = np.asarray(self.o_prev, dtype=np.float64)
            if o_prev.shape != u.shape:
                raise ShapeMismatchError(f"o_prev shape {o_prev.shape} does not match u shape {u.shape}")
            if not np.all((o_prev == 0) | (o_prev == 1)):
                raise NeuroError("o_prev must be binary")
            object.__setattr__(self, "o_prev", o_prev)
        if not self.v_th > 0:
            raise NeuroError(f"v_th must be positive, got {self.v_th}")

    @classmethod
    def at_rest(cls, shape: Tuple[int, ...], v_th: float = 1.0, leak: float = 0.9) -> "LifLayerState":
        return cls(np.zeros(shape), v_th, leak)


def _reset_term(v_th: float, o_prev: np.ndarray) -> Union[np.ndarray, float]:
    # An infinite threshold never fires, so there is nothing to subtract.
    return v_th * o_prev if np.isfinite(v_th) else 0.0


def lif_step(state: LifLayerState, input_current: np.ndarray) -> Tuple[LifLayerState, np.ndarray]:
    """
    One timestep of a LIF layer.

    Returns:
        (new state, binary spike grid); the input state is not modified

    Raises:
        ShapeMismatchError: input_current shape differs from the state's
    """
    current = np.asarray(input_current, dtype=np.float64)
    if current.shape != state.u.shape:
        raise ShapeMismatchError(f"input shape {current.shape} does not match state shape {state.u.shape}")

    u = state.leak * state.u + current - _reset_term(state.v_th, state.o_prev)
    o = heaviside(u / state.v_th - 1.0)
    return replace(state, u=u, o_prev=o), o


def lif_update(
    u: Union[Var, np.ndarray],
    o_prev: Union[Var, np.ndarray],
    current: Var,
    v_th: Var,
    leak: Var,
    surrogate: Surrogate,
    smooth: bool = False,
) -> Tuple[Var, Var, Var]:
    """
    Traced LIF step.

    Returns:
        (u, z, o) for this timestep; o feeds the next step's reset, so
        gradients flow through time as well as through v_th and leak
    """
    u, o_prev = lift(u), lift(o_prev)
    if u.shape != current.shape:
        raise ShapeMismatchError(f"input shape {current.shape} does not match state shape {u.shape}")
    if np.isfinite(v_th.value).all():
        u_new = leak * u + current - v_th * o_prev
    else:
        u_new = leak * u + current
    z = u_new / v_th - 1.0
    return u_new, z, spike(z, surrogate, smooth)

"""
Neuro Module

LIF dynamics, convolution, surrogate gradients, a small autodiff tape,
optimizers and checkpoint files for the speed-separation and pose networks.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import CheckpointError, NeuroError, NonFiniteGradientError, ShapeMismatchError, TapeError
from .kernels import conv2d, conv2d_backward, conv2d_forward, conv2d_op
from .layers import ConvLayer, Linear, init_conv, init_linear
from .lif import LifLayerState, lif_step, lif_update
from .optim import DEFAULT_CLAMPS, Optimizer, sgd_step
from .surrogate import Logistic, Surrogate, Triangle, heaviside, make_surrogate, spike, surrogate_spike_grad
from .tape import Tape, Var, log, matmul, mean_all, relu, reshape, sigmoid, sum_all

__all__ = [
    "CheckpointError",
    "ConvLayer",
    "DEFAULT_CLAMPS",
    "LifLayerState",
    "Linear",
    "Logistic",
    "NeuroError",
    "NonFiniteGradientError",
    "Optimizer",
    "ShapeMismatchError",
    "Surrogate",
    "Tape",
    "TapeError",
    "Triangle",
    "Var",
    "conv2d",
    "conv2d_backward",
    "conv2d_forward",
    "conv2d_op",
    "heaviside",
    "init_conv",
    "init_linear",
    "lif_step",
    "lif_update",
    "load_checkpoint",
    "log",
    "make_surrogate",
    "matmul",
    "mean_all",
    "relu",
    "reshape",
    "save_checkpoint",
    "sgd_step",
    "sigmoid",
    "spike",
    "sum_all",
    "surrogate_spike_grad",
]

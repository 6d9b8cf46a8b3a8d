"""
Object Flow Speed (OFS) Network

A single spiking convolution: 2 polarity channels in, 1 channel out,
same-padding, followed by LIF neurons with a trainable threshold and leak.
The B bins of a window are fed as consecutive timesteps; the window's
output is the OR of the B spike grids.

One OFS network is trained per speed bin k to pass the events of objects
moving at bin k's speed or faster.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import maximum_filter

from .errors import ModelError, TrainingDivergedError
from .targets import TrainingExample, ofs_target
from .trainer import TrainingCurve, check_loss, iterate_batches, param_norms
from ..config import OfsSettings
from ..events import BinnedVolume
from ..logger import get_logger
from ..neuro import (
    ConvLayer,
    LifLayerState,
    NonFiniteGradientError,
    Optimizer,
    ShapeMismatchError,
    Surrogate,
    Tape,
    Var,
    conv2d,
    conv2d_op,
    init_conv,
    lif_step,
    lif_update,
    load_checkpoint,
    log,
    make_surrogate,
    save_checkpoint,
    sigmoid,
)
from ..simcam import SpeedBinTable

logger = get_logger(__name__)

# Keeps log(p) and log(1 - p) finite.
PROB_EPS = 1e-6

CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "val_spike_rate")


@dataclass(frozen=True, eq=False)
class OfsModel:
    conv: ConvLayer
    v_th: float
    leak: float
    speed_bin: int
    shape: Tuple[int, int]

    def __post_init__(self) -> None:
        if self.speed_bin < 1:
            raise ModelError(f"OFS speed bin must be at least 1, got {self.speed_bin}")
        if self.conv.in_channels != 2 or self.conv.out_channels != 1:
            raise ShapeMismatchError(f"OFS conv must map 2 channels to 1, got {self.conv.weight.shape}")
        if self.conv.stride != 1 or 2 * self.conv.padding != self.conv.kernel_size - 1:
            raise ShapeMismatchError("OFS conv must use stride 1 and same padding")

    def params(self) -> Dict[str, np.ndarray]:
        return {"weight": self.conv.weight, "v_th": np.array(self.v_th), "leak": np.array(self.leak)}

    def with_params(self, params: Mapping[str, np.ndarray]) -> "OfsModel":
        conv = ConvLayer(np.asarray(params["weight"], dtype=np.float64), 1, self.conv.padding)
        return OfsModel(conv, float(params["v_th"]), float(params["leak"]), self.speed_bin, self.shape)


@dataclass(frozen=True, eq=False)
class OfsOutput:
    spikes: np.ndarray
    aggregate: np.ndarray

    @property
    def support(self) -> int:
        return int(self.aggregate.sum())


def init_ofs(rng: np.random.Generator, settings: OfsSettings, speed_bin: int, shape: Tuple[int, int]) -> OfsModel:
    conv = init_conv(rng, 1, 2, settings.kernel, stride=1, padding=settings.kernel // 2)
    return OfsModel(conv, settings.v_th_init, settings.leak_init, speed_bin, tuple(shape))


def ofs_forward(model: OfsModel, volume: BinnedVolume) -> OfsOutput:
    """
    Run the B bins of a window through the network.

    Raises:
        ShapeMismatchError: volume grid differs from the model's
    """
    if volume.shape != model.shape:
        raise ShapeMismatchError(f"volume shape {volume.shape} does not match OFS shape {model.shape}")

    currents = conv2d(volume.occupancy(), model.conv)[:, 0]
    state = LifLayerState.at_rest(model.shape, model.v_th, model.leak)
    spikes = np.zeros((volume.B,) + model.shape, dtype=np.uint8)
    for t in range(volume.B):
        state, o = lif_step(state, currents[t])
        spikes[t] = o
    return OfsOutput(spikes, spikes.max(axis=0))


def receptive_mask(event_grid: np.ndarray, kernel: int) -> np.ndarray:
    """Pixels whose kernel x kernel neighbourhood holds an event"""
    return maximum_filter(np.asarray(event_grid, dtype=np.uint8), size=kernel, mode="constant").astype(np.float64)


def ofs_membrane(
    weight: Var,
    v_th: Var,
    leak: Var,
    x: np.ndarray,
    padding: int,
    surrogate: Surrogate,
    smooth: bool = False,
) -> List[Var]:
    """Traced forward over an (N, B, 2, H, W) occupancy batch; returns z per timestep"""
    n, steps, _, h, w = x.shape
    u: Union[Var, np.ndarray] = np.zeros((n, 1, h, w))
    o: Union[Var, np.ndarray] = np.zeros((n, 1, h, w))
    zs = []
    for t in range(steps):
        current = conv2d_op(x[:, t], weight, padding=padding)
        u, z, o = lif_update(u, o, current, v_th, leak, surrogate, smooth)
        zs.append(z)
    return zs


def ofs_loss_graph(
    weight: Var,
    v_th: Var,
    leak: Var,
    x: np.ndarray,
    targets: np.ndarray,
    masks: np.ndarray,
    settings: OfsSettings,
    surrogate: Surrogate,
    smooth: bool = False,
) -> Var:
    """
    Masked binary cross-entropy of the window spike probability.

    Each timestep spikes with probability sigmoid(gain * z_t); the window
    fires when any timestep does, p = 1 - prod(1 - p_t).
    """
    zs = ofs_membrane(weight, v_th, leak, x, settings.kernel // 2, surrogate, smooth)
    silent: Union[Var, float] = 1.0
    for z in zs:
        silent = silent * sigmoid(-settings.logistic_gain * z)
    p = (1.0 - 2 * PROB_EPS) * (1.0 - silent) + PROB_EPS

    y = targets[:, None].astype(np.float64)
    m = masks[:, None].astype(np.float64)
    bce = -(settings.pos_weight * y * log(p) + (1.0 - y) * log(1.0 - p))
    return (bce * m).sum() / max(float(m.sum()), 1.0)


def _batch_arrays(
    examples: Sequence[TrainingExample],
    bin_k: int,
    table: SpeedBinTable,
    kernel: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.stack([ex.volume.occupancy() for ex in examples])
    y = np.stack([ofs_target(ex, bin_k, table) for ex in examples])
    m = np.stack([receptive_mask(ex.event_grid, kernel) for ex in examples])
    return x, y, m


def ofs_loss(
    model: OfsModel,
    examples: Sequence[TrainingExample],
    table: SpeedBinTable,
    settings: OfsSettings,
) -> float:
    """Validation loss of a model; 0 for no examples"""
    if not examples:
        return 0.0
    surrogate = make_surrogate(settings.surrogate, settings.surrogate_width)
    total, weight = 0.0, 0.0
    for start in range(0, len(examples), settings.batch_size):
        chunk = examples[start : start + settings.batch_size]
        x, y, m = _batch_arrays(chunk, model.speed_bin, table, settings.kernel)
        loss = ofs_loss_graph(
            Var(model.conv.weight), Var(model.v_th), Var(model.leak), x, y, m, settings, surrogate
        )
        mass = max(float(m.sum()), 1.0)
        total += float(loss.value) * mass
        weight += mass
    return total / weight


def spike_rate(model: OfsModel, examples: Sequence[TrainingExample]) -> float:
    """Fraction of pixels that fire in the window aggregate"""
    if not examples:
        return 0.0
    fired = sum(ofs_forward(model, ex.volume).support for ex in examples)
    return fired / float(len(examples) * model.shape[0] * model.shape[1])


def train_ofs(
    train: Sequence[TrainingExample],
    val: Sequence[TrainingExample],
    bin_k: int,
    table: SpeedBinTable,
    settings: OfsSettings,
    seed: int,
    shape: Tuple[int, int],
) -> Tuple[OfsModel, TrainingCurve]:
    """
    Train the OFS network for speed bin k.

    Raises:
        ModelError: no training examples, or bin_k outside 1..N
        TrainingDivergedError: loss or gradients went non-finite
    """
    if not 1 <= bin_k <= table.n_bins:
        raise ModelError(f"OFS bin {bin_k} outside 1..{table.n_bins}")
    if not train:
        raise ModelError(f"no training examples for OFS bin {bin_k}")

    bin_logger = logger.bind(bin=bin_k)
    rng = np.random.default_rng(seed)
    model = init_ofs(rng, settings, bin_k, shape)
    surrogate = make_surrogate(settings.surrogate, settings.surrogate_width)
    optimizer = Optimizer(settings.lr, settings.momentum)
    curve = TrainingCurve(CURVE_COLUMNS)

    val_set = val or train
    curve.add(epoch=0, train_loss=float("nan"), val_loss=ofs_loss(model, val_set, table, settings),
              val_spike_rate=spike_rate(model, val_set))

    for epoch in range(1, settings.epochs + 1):
        losses = []
        for b, idx in enumerate(iterate_batches(len(train), settings.batch_size, rng)):
            x, y, m = _batch_arrays([train[i] for i in idx], bin_k, table, settings.kernel)
            params = model.params()

            tape = Tape()
            weight = tape.leaf(params["weight"], "weight")
            v_th = tape.leaf(params["v_th"], "v_th")
            leak = tape.leaf(params["leak"], "leak")
            loss = ofs_loss_graph(weight, v_th, leak, x, y, m, settings, surrogate)
            check_loss(float(loss.value), epoch, b, params)

            grads = tape.backward(loss)
            try:
                model = model.with_params(optimizer.step(params, grads))
            except NonFiniteGradientError as e:
                raise TrainingDivergedError(epoch, b, param_norms(params), e.name) from e
            losses.append(float(loss.value))

        val_loss = ofs_loss(model, val_set, table, settings)
        rate = spike_rate(model, val_set)
        curve.add(epoch=epoch, train_loss=float(np.mean(losses)), val_loss=val_loss, val_spike_rate=rate)
        bin_logger.info(
            "OFS epoch",
            epoch=epoch,
            train_loss=round(float(np.mean(losses)), 6),
            val_loss=round(val_loss, 6),
            spike_rate=round(rate, 6),
            v_th=round(model.v_th, 4),
            leak=round(model.leak, 4),
        )

    bin_logger.info("Trained OFS", final_loss=curve.final["val_loss"])
    return model, curve


def save_ofs(path: Union[str, Path], model: OfsModel, extra: Optional[Mapping[str, Any]] = None) -> None:
    meta = {
        "kind": "ofs",
        "speed_bin": model.speed_bin,
        "height": model.shape[0],
        "width": model.shape[1],
        "padding": model.conv.padding,
    }
    meta.update(extra or {})
    save_checkpoint(path, model.params(), meta)


def load_ofs(path: Union[str, Path]) -> Tuple[OfsModel, Dict[str, Any]]:
    """
    Raises:
        FileNotFoundError, CheckpointError: unreadable file
        ModelError: the checkpoint holds another kind of model
    """
    params, meta = load_checkpoint(path)
    if meta.get("kind") != "ofs":
        raise ModelError(f"{path}: not an OFS checkpoint (kind={meta.get('kind')!r})")
    conv = ConvLayer(params["weight"], 1, int(meta["padding"]))
    model = OfsModel(conv, float(params["v_th"]), float(params["leak"]), int(meta["speed_bin"]),
                     (int(meta["height"]), int(meta["width"])))
    return model, meta

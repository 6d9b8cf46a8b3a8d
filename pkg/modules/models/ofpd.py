"""
Object Flow Pose and Direction (OFPD) Network

Two strided convolutions with ReLU, a fully-connected trunk and two linear
heads: the object centre normalized by (W - 1, H - 1), and the direction of
motion as (cos, sin). The direction is turned into an angle with atan2.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ModelError, TrainingDivergedError
from .targets import TrainingExample
from .trainer import TrainingCurve, check_loss, iterate_batches, param_norms
from ..config import OfpdSettings
from ..logger import get_logger
from ..neuro import (
    ConvLayer,
    Linear,
    NonFiniteGradientError,
    Optimizer,
    ShapeMismatchError,
    Tape,
    Var,
    conv2d_op,
    init_conv,
    init_linear,
    load_checkpoint,
    mean_all,
    relu,
    save_checkpoint,
)
from ..simcam import wrap_angle

logger = get_logger(__name__)

# Fewer input pixels than this make a prediction low-confidence.
LOW_CONFIDENCE_SUPPORT = 10

CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "val_pixE", "val_dirE")

LAYERS = ("conv1", "conv2", "fc", "pose", "direction")


@dataclass(frozen=True, eq=False)
class OfpdModel:
    conv1: ConvLayer
    conv2: ConvLayer
    fc: Linear
    pose: Linear
    direction: Linear
    shape: Tuple[int, int]

    def __post_init__(self) -> None:
        if self.conv1.in_channels != 1 or self.conv2.in_channels != self.conv1.out_channels:
            raise ShapeMismatchError("OFPD conv channels do not chain")
        h, w = self.conv2.output_shape(*self.conv1.output_shape(*self.shape))
        if self.fc.weight.shape[0] != self.conv2.out_channels * h * w:
            raise ShapeMismatchError(
                f"OFPD fc expects {self.fc.weight.shape[0]} features, conv stack gives {self.conv2.out_channels * h * w}"
            )
        if self.pose.weight.shape[1] != 2 or self.direction.weight.shape[1] != 2:
            raise ShapeMismatchError("OFPD heads must have 2 outputs")

    def params(self) -> Dict[str, np.ndarray]:
        params = {}
        for name in LAYERS:
            layer = getattr(self, name)
            params[f"{name}.weight"] = layer.weight
            params[f"{name}.bias"] = layer.bias
        return params

    def with_params(self, params: Mapping[str, np.ndarray]) -> "OfpdModel":
        def conv(old: ConvLayer, name: str) -> ConvLayer:
            return ConvLayer(params[f"{name}.weight"], old.stride, old.padding, params[f"{name}.bias"])

        def linear(name: str) -> Linear:
            return Linear(params[f"{name}.weight"], params[f"{name}.bias"])

        return OfpdModel(
            conv(self.conv1, "conv1"),
            conv(self.conv2, "conv2"),
            linear("fc"),
            linear("pose"),
            linear("direction"),
            self.shape,
        )


@dataclass(frozen=True)
class OfpdPrediction:
    center: Tuple[float, float]
    direction: float
    support: int

    @property
    def low_confidence(self) -> bool:
        return self.support < LOW_CONFIDENCE_SUPPORT


def init_ofpd(rng: np.random.Generator, settings: OfpdSettings, shape: Tuple[int, int]) -> OfpdModel:
    k1, k2 = settings.conv1_kernel, settings.conv2_kernel
    conv1 = init_conv(rng, settings.conv1_channels, 1, k1, stride=2, padding=k1 // 2, bias=True)
    conv2 = init_conv(rng, settings.conv2_channels, settings.conv1_channels, k2, stride=2, padding=k2 // 2, bias=True)
    h, w = conv2.output_shape(*conv1.output_shape(*shape))
    return OfpdModel(
        conv1,
        conv2,
        init_linear(rng, settings.conv2_channels * h * w, settings.hidden),
        init_linear(rng, settings.hidden, 2),
        init_linear(rng, settings.hidden, 2),
        tuple(shape),
    )


def ofpd_graph(model: OfpdModel, p: Mapping[str, Var], x: np.ndarray) -> Tuple[Var, Var]:
    """
    Forward pass over an (N, 1, H, W) batch with parameters p.

    Returns:
        (normalized centre (N, 2), direction (cos, sin) (N, 2))
    """
    h = relu(conv2d_op(x, p["conv1.weight"], p["conv1.bias"], model.conv1.stride, model.conv1.padding))
    h = relu(conv2d_op(h, p["conv2.weight"], p["conv2.bias"], model.conv2.stride, model.conv2.padding))
    h = h.reshape(x.shape[0], -1)
    h = relu(h @ p["fc.weight"] + p["fc.bias"])
    return h @ p["pose.weight"] + p["pose.bias"], h @ p["direction.weight"] + p["direction.bias"]


def _as_batch(model: OfpdModel, grids: np.ndarray) -> np.ndarray:
    grids = np.asarray(grids, dtype=np.float64)
    if grids.ndim == 2:
        grids = grids[None]
    if grids.shape[1:] != model.shape:
        raise ShapeMismatchError(f"input grid {grids.shape[1:]} does not match OFPD shape {model.shape}")
    return grids[:, None]


def _scale(model: OfpdModel) -> np.ndarray:
    h, w = model.shape
    return np.array([max(w - 1, 1), max(h - 1, 1)], dtype=np.float64)


def ofpd_predict(model: OfpdModel, grids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched inference on (N, H, W) occupancy grids.

    Returns:
        (centres in pixels (N, 2), directions in radians (N,), in [-pi, pi))
    """
    x = _as_batch(model, grids)
    p = {name: Var(value) for name, value in model.params().items()}
    pose, trig = ofpd_graph(model, p, x)
    centers = pose.value * _scale(model)
    directions = wrap_angle(np.arctan2(trig.value[:, 1], trig.value[:, 0]))
    return centers, np.asarray(directions, dtype=np.float64)


def ofpd_forward(model: OfpdModel, grid: np.ndarray) -> OfpdPrediction:
    """
    Centre (pixels) and direction (radians) for one H x W occupancy grid.

    Raises:
        ShapeMismatchError: grid shape differs from the model's
    """
    centers, directions = ofpd_predict(model, grid)
    support = int(np.count_nonzero(grid))
    return OfpdPrediction((float(centers[0, 0]), float(centers[0, 1])), float(directions[0]), support)


def ofpd_targets(model: OfpdModel, examples: Sequence[TrainingExample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.stack([ex.object_grid for ex in examples])
    pose = np.array([ex.center_px for ex in examples], dtype=np.float64) / _scale(model)
    angles = np.array([ex.direction for ex in examples], dtype=np.float64)
    return x, pose, np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def ofpd_loss_graph(
    model: OfpdModel,
    p: Mapping[str, Var],
    x: np.ndarray,
    pose_target: np.ndarray,
    trig_target: np.ndarray,
    beta: float,
) -> Var:
    """Pose MSE plus beta times direction MSE"""
    pose, trig = ofpd_graph(model, p, x[:, None].astype(np.float64))
    dp = pose - pose_target
    dd = trig - trig_target
    return mean_all(dp * dp) + beta * mean_all(dd * dd)


def angular_error_deg(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Absolute wrapped angle difference in degrees, in [0, 180]"""
    return np.abs(np.degrees(wrap_angle(np.asarray(pred) - np.asarray(truth))))


def evaluate_ofpd(model: OfpdModel, examples: Sequence[TrainingExample], beta: float, batch_size: int = 64) -> Dict[str, float]:
    """Validation loss, mean pixel error and mean direction error in degrees"""
    if not examples:
        return {"loss": 0.0, "pixE": 0.0, "dirE": 0.0}
    p = {name: Var(value) for name, value in model.params().items()}
    losses, pix, dirs = [], [], []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        x, pose_t, trig_t = ofpd_targets(model, chunk)
        losses.append(float(ofpd_loss_graph(model, p, x, pose_t, trig_t, beta).value) * len(chunk))
        centers, directions = ofpd_predict(model, x)
        truth = np.array([ex.center_px for ex in chunk])
        pix.extend(np.hypot(*(centers - truth).T).tolist())
        dirs.extend(angular_error_deg(directions, [ex.direction for ex in chunk]).tolist())
    return {"loss": sum(losses) / len(examples), "pixE": float(np.mean(pix)), "dirE": float(np.mean(dirs))}


def train_ofpd(
    train: Sequence[TrainingExample],
    val: Sequence[TrainingExample],
    settings: OfpdSettings,
    seed: int,
    shape: Tuple[int, int],
) -> Tuple[OfpdModel, TrainingCurve]:
    """
    Train the pose and direction network on ground-truth-separated events.

    Raises:
        ModelError: no training examples
        TrainingDivergedError: loss or gradients went non-finite
    """
    if not train:
        raise ModelError("no training examples for OFPD")

    rng = np.random.default_rng(seed)
    model = init_ofpd(rng, settings, shape)
    optimizer = Optimizer(settings.lr, settings.momentum)
    curve = TrainingCurve(CURVE_COLUMNS)

    val_set = val or train
    metrics = evaluate_ofpd(model, val_set, settings.beta)
    curve.add(epoch=0, train_loss=float("nan"), val_loss=metrics["loss"], val_pixE=metrics["pixE"], val_dirE=metrics["dirE"])

    for epoch in range(1, settings.epochs + 1):
        losses: List[float] = []
        for b, idx in enumerate(iterate_batches(len(train), settings.batch_size, rng)):
            x, pose_t, trig_t = ofpd_targets(model, [train[i] for i in idx])
            params = model.params()

            tape = Tape()
            p = {name: tape.leaf(value, name) for name, value in params.items()}
            loss = ofpd_loss_graph(model, p, x, pose_t, trig_t, settings.beta)
            check_loss(float(loss.value), epoch, b, params)

            grads = tape.backward(loss)
            try:
                model = model.with_params(optimizer.step(params, grads))
            except NonFiniteGradientError as e:
                raise TrainingDivergedError(epoch, b, param_norms(params), e.name) from e
            losses.append(float(loss.value))

        metrics = evaluate_ofpd(model, val_set, settings.beta)
        train_loss = float(np.mean(losses))
        curve.add(epoch=epoch, train_loss=train_loss, val_loss=metrics["loss"], val_pixE=metrics["pixE"], val_dirE=metrics["dirE"])
        logger.info(
            "OFPD epoch",
            epoch=epoch,
            train_loss=round(train_loss, 6),
            val_loss=round(metrics["loss"], 6),
            pixE=round(metrics["pixE"], 3),
            dirE=round(metrics["dirE"], 3),
        )

    logger.info("Trained OFPD", pixE=curve.final["val_pixE"], dirE=curve.final["val_dirE"])
    return model, curve


def save_ofpd(path: Union[str, Path], model: OfpdModel, extra: Optional[Mapping[str, Any]] = None) -> None:
    meta: Dict[str, Any] = {"kind": "ofpd", "height": model.shape[0], "width": model.shape[1]}
    for name in ("conv1", "conv2"):
        layer = getattr(model, name)
        meta[f"{name}_stride"] = layer.stride
        meta[f"{name}_padding"] = layer.padding
    meta.update(extra or {})
    save_checkpoint(path, model.params(), meta)


def load_ofpd(path: Union[str, Path]) -> Tuple[OfpdModel, Dict[str, Any]]:
    """
    Raises:
        FileNotFoundError, CheckpointError: unreadable file
        ModelError: the checkpoint holds another kind of model
    """
    params, meta = load_checkpoint(path)
    if meta.get("kind") != "ofpd":
        raise ModelError(f"{path}: not an OFPD checkpoint (kind={meta.get('kind')!r})")

    def conv(name: str) -> ConvLayer:
        return ConvLayer(
            params[f"{name}.weight"], int(meta[f"{name}_stride"]), int(meta[f"{name}_padding"]), params[f"{name}.bias"]
        )

    def linear(name: str) -> Linear:
        return Linear(params[f"{name}.weight"], params[f"{name}.bias"])

    model = OfpdModel(conv("conv1"), conv("conv2"), linear("fc"), linear("pose"), linear("direction"),
                      (int(meta["height"]), int(meta["width"])))
    return model, meta


def mirror_consistency(model: OfpdModel, grids: np.ndarray) -> float:
    """
    Mean |cos(pred) + cos(pred of the horizontally mirrored grid)|.

    0 means the direction head is exactly mirror-consistent.
    """
    _, a = ofpd_predict(model, grids)
    _, b = ofpd_predict(model, np.asarray(grids)[..., ::-1])
    return float(np.mean(np.abs(np.cos(a) + np.cos(b))))


"""
Training Targets

Turns generated sequences into per-window training examples: the binned
input volume, the events that belong to the object (noise removed by
distance to the projected centre), and the ground truth at the window
midpoint. OFS targets are derived per speed bin from those examples.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingGroundTruthError
from ..events import BinnedVolume, EventStream, bin_events, iter_windows
from ..logger import get_logger
from ..simcam import GroundTruth, GroundTruthSample, Manifest, SequenceSpec, SpeedBinTable, derive_seed

logger = get_logger(__name__)

# Extra pixels around the silhouette still counted as object events.
OBJECT_MARGIN_PX = 1.5

# A square's corners sit sqrt(2) half-extents from its centre.
CORNER_FACTOR = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """One window of one single-object sequence"""
    sequence: str
    volume: BinnedVolume
    object_grid: np.ndarray
    center_px: Tuple[float, float]
    direction: float
    speed: float
    speed_bin: int

    @property
    def event_grid(self) -> np.ndarray:
        return self.volume.event_grid()


def match_ground_truth(gt: GroundTruth, t_start: int, dt: int, tolerance_us: float, sequence: str = "") -> GroundTruthSample:
    """
    Ground truth at the window midpoint t_start + dt / 2.

    Raises:
        MissingGroundTruthError: no sample within tolerance_us of the midpoint
    """
    t_mid = t_start + dt / 2.0
    sample = gt.nearest(t_mid, tolerance_us)
    if sample is None:
        raise MissingGroundTruthError(sequence, t_mid)
    return sample


def object_event_grid(
    volume: BinnedVolume,
    gt: GroundTruth,
    radius_px: float,
    tolerance_us: float,
) -> np.ndarray:
    """
    Pixels with events in the window that lie within reach of the object's
    projected centre at some sample inside the window (one sample period of
    slack on both ends, for trailing-edge events).
    """
    events = volume.event_grid()
    if not events.any():
        return events

    t0, t1 = volume.t_start, volume.t_start + volume.dt
    inside = (gt.t_us >= t0 - tolerance_us) & (gt.t_us <= t1 + tolerance_us)
    if not inside.any():
        return np.zeros_like(events)
    centers = np.stack([gt.cx[inside], gt.cy[inside]], axis=-1)

    ys, xs = np.nonzero(events)
    d2 = (xs[:, None] - centers[None, :, 0]) ** 2 + (ys[:, None] - centers[None, :, 1]) ** 2
    reach = radius_px * CORNER_FACTOR + OBJECT_MARGIN_PX
    near = d2.min(axis=1) <= reach * reach

    grid = np.zeros_like(events)
    grid[ys[near], xs[near]] = 1
    return grid


def sequence_examples(
    name: str,
    events: EventStream,
    gt: GroundTruth,
    dt: int,
    B: int,
    radius_px: float,
    tolerance_us: float,
    t_end: Optional[int] = None,
    window_starts: Optional[Iterable[int]] = None,
) -> List[TrainingExample]:
    """Examples for the full windows of one sequence (or the given window starts)"""
    if t_end is None:
        t_end = int(gt.t_us[-1]) + 1 if len(gt) else 0
    starts = list(window_starts) if window_starts is not None else list(iter_windows(t_end, dt))

    examples = []
    for t_start in starts:
        volume = bin_events(events, t_start, dt, B, events.height, events.width)
        sample = match_ground_truth(gt, t_start, dt, tolerance_us, name)
        examples.append(
            TrainingExample(
                sequence=name,
                volume=volume,
                object_grid=object_event_grid(volume, gt, radius_px, tolerance_us),
                center_px=sample.center_px,
                direction=sample.direction_px,
                speed=sample.speed,
                speed_bin=sample.speed_bin,
            )
        )
    return examples


def ofs_target(example: TrainingExample, bin_k: int, table: SpeedBinTable) -> np.ndarray:
    """Object events when the object moves at bin k's minimum speed or faster, else nothing"""
    if example.speed >= table.min_speed(bin_k):
        return example.object_grid.copy()
    return np.zeros_like(example.object_grid)


def build_ofs_targets(
    events: EventStream,
    gt: GroundTruth,
    bin_k: int,
    table: SpeedBinTable,
    dt: int,
    B: int,
    radius_px: float,
    tolerance_us: float,
    name: str = "",
) -> List[np.ndarray]:
    """
    Per-window binary OFS target grids for one single-object sequence.

    Raises:
        MissingGroundTruthError: a window midpoint has no ground truth
    """
    examples = sequence_examples(name, events, gt, dt, B, radius_px, tolerance_us)
    return [ofs_target(ex, bin_k, table) for ex in examples]


def split_validation(specs: Sequence[SequenceSpec], fraction: float, seed: int) -> Tuple[List[SequenceSpec], List[SequenceSpec]]:
    """Deterministic (train, validation) split of sequences"""
    specs = list(specs)
    if fraction <= 0 or len(specs) < 2:
        return specs, []
    n_val = min(len(specs) - 1, max(1, int(round(len(specs) * fraction))))
    order = np.random.default_rng(derive_seed(seed, "validation")).permutation(len(specs))
    val_idx = set(order[:n_val].tolist())
    train = [s for i, s in enumerate(specs) if i not in val_idx]
    val = [s for i, s in enumerate(specs) if i in val_idx]
    return train, val


def _window_starts(spec: SequenceSpec, dt: int, limit: int, seed: int) -> List[int]:
    starts = list(iter_windows(int(round(spec.duration_s * 1e6)), dt))
    if limit <= 0 or len(starts) <= limit:
        return starts
    rng = np.random.default_rng(derive_seed(seed, f"windows:{spec.name}:{dt}"))
    return sorted(starts[i] for i in rng.choice(len(starts), size=limit, replace=False))


def load_examples(
    manifest: Manifest,
    specs: Sequence[SequenceSpec],
    dt: int,
    B: int,
    windows_per_sequence: int = 0,
    seed: int = 0,
) -> List[TrainingExample]:
    """
    Training examples for the given manifest sequences.

    windows_per_sequence > 0 keeps a seeded random subset of each
    sequence's windows.
    """
    tolerance = 1e6 / manifest.camera.sample_rate
    examples: List[TrainingExample] = []
    for spec in specs:
        events, gt = manifest.load_sequence(spec)
        starts = _window_starts(spec, dt, windows_per_sequence, seed)
        examples.extend(
            sequence_examples(spec.name, events, gt, dt, B, spec.max_radius_px, tolerance, window_starts=starts)
        )
    logger.info("Loaded training examples", sequences=len(specs), examples=len(examples), dt_us=dt)
    return examples

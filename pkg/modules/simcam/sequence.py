"""
Sequence Generation

Samples the camera at its sample rate, renders every object in the scene,
turns consecutive frame pairs into events and logs per-object ground truth
(projected centre, world velocity, image-plane direction, speed bin) at the
same rate.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .camera import CameraModel, Shape, emit_events, silhouette
from .speed_bins import SimulationError, SpeedBinTable, speeds_to_bins
from .trajectory import Trajectory, trajectory_state
from ..events import EventStream
from ..logger import get_logger

logger = get_logger(__name__)

GT_COLUMNS = ("t_us", "cx_px", "cy_px", "vx", "vy", "vz", "speed", "dir_rad", "bin")


def wrap_angle(angle: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Wrap radians into [-pi, pi)"""
    return (np.asarray(angle) + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class GroundTruthSample:
    """Object state at one sample instant"""
    t: int
    center_px: tuple
    velocity: tuple
    speed: float
    direction_px: float
    speed_bin: int


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Columnar ground-truth log of one object, one row per camera sample"""
    t_us: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    velocity: np.ndarray
    speed: np.ndarray
    direction: np.ndarray
    speed_bin: np.ndarray

    def __len__(self) -> int:
        return len(self.t_us)

    def __getitem__(self, i: int) -> GroundTruthSample:
        return GroundTruthSample(
            t=int(self.t_us[i]),
            center_px=(float(self.cx[i]), float(self.cy[i])),
            velocity=tuple(float(v) for v in self.velocity[i]),
            speed=float(self.speed[i]),
            direction_px=float(self.direction[i]),
            speed_bin=int(self.speed_bin[i]),
        )

    def nearest(self, t_us: float, tolerance_us: float) -> Optional[GroundTruthSample]:
        """Sample nearest to t_us, or None when none lies within tolerance"""
        if not len(self):
            return None
        i = int(np.searchsorted(self.t_us, t_us))
        candidates = [j for j in (i - 1, i) if 0 <= j < len(self)]
        j = min(candidates, key=lambda c: abs(float(self.t_us[c]) - t_us))
        if abs(float(self.t_us[j]) - t_us) > tolerance_us:
            return None
        return self[j]


@dataclass(frozen=True)
class SceneObject:
    shape: Shape
    trajectory: Trajectory


@dataclass(frozen=True, eq=False)
class Scene:
    """Generated events plus one ground-truth log per object"""
    events: EventStream
    ground_truths: List[GroundTruth] = field(default_factory=list)
    max_radius_px: List[float] = field(default_factory=list)


def log_ground_truth(
    traj: Trajectory,
    camera: CameraModel,
    t_us: np.ndarray,
    table: SpeedBinTable,
) -> GroundTruth:
    t_s = np.asarray(t_us, dtype=np.float64) / 1e6
    position, velocity = trajectory_state(traj, t_s)
    u, v, _ = camera.project(position)
    du, dv = camera.project_velocity(position, velocity)
    speed = np.sqrt(velocity[:, 0] * velocity[:, 0] + velocity[:, 1] * velocity[:, 1] + velocity[:, 2] * velocity[:, 2])
    return GroundTruth(
        t_us=np.asarray(t_us, dtype=np.int64),
        cx=u,
        cy=v,
        velocity=velocity,
        speed=speed,
        direction=wrap_angle(np.arctan2(dv, du)),
        speed_bin=speeds_to_bins(speed, table),
    )


def inject_noise(
    stream: EventStream,
    rate: float,
    t_start: int,
    t_end: int,
    rng: np.random.Generator,
) -> EventStream:
    """
    Add uniform background noise: Poisson count at `rate` events/s over
    [t_start, t_end) us, uniform pixels and times, random polarity.
    Signal events stay ahead of noise events with equal timestamps.
    """
    if rate <= 0 or t_end <= t_start:
        return stream
    count = int(rng.poisson(rate * (t_end - t_start) / 1e6))
    noise = EventStream.from_arrays(
        x=rng.integers(0, stream.width, count),
        y=rng.integers(0, stream.height, count),
        t=rng.integers(t_start, t_end, count),
        p=rng.integers(0, 2, count),
        width=stream.width,
        height=stream.height,
    )
    return EventStream.merge([stream, noise])


def generate_scene(
    objects: Sequence[SceneObject],
    camera: CameraModel,
    duration: float,
    noise_rate: float = 0.0,
    seed: int = 0,
    table: Optional[SpeedBinTable] = None,
) -> Scene:
    """
    Simulate every object for `duration` seconds.

    Frame i is taken at camera.sample_time_us(i); events from frame pair
    (i - 1, i) carry frame i's timestamp.

    Raises:
        SimulationError: duration <= 0
        NonPositiveIntensityError: propagated from emit_events
    """
    if not duration > 0:
        raise SimulationError(f"duration must be positive, got {duration}")
    table = table or SpeedBinTable()

    n_samples = max(1, int(round(duration * camera.sample_rate)))
    t_us = np.array([camera.sample_time_us(i) for i in range(n_samples)], dtype=np.int64)
    t_s = t_us / 1e6

    positions = [trajectory_state(obj.trajectory, t_s)[0] for obj in objects]
    ground_truths = [log_ground_truth(obj.trajectory, camera, t_us, table) for obj in objects]
    max_radius = [
        camera.radius_px(obj.shape, float(max(np.min(pos[:, 2]), 1e-3))) for obj, pos in zip(objects, positions)
    ]

    def frame_at(i: int) -> np.ndarray:
        inside = np.zeros((camera.height, camera.width), dtype=bool)
        for obj, pos in zip(objects, positions):
            inside |= silhouette(obj.shape, pos[i], camera)
        return np.where(inside, camera.foreground, camera.background)

    chunks = []
    prev = frame_at(0)
    for i in range(1, n_samples):
        frame = frame_at(i)
        chunk = emit_events(prev, frame, int(t_us[i]), camera.theta)
        if len(chunk):
            chunks.append(chunk.records)
        prev = frame

    records = np.concatenate(chunks) if chunks else EventStream.empty(camera.width, camera.height).records
    events = EventStream(records, camera.width, camera.height)

    rng = np.random.default_rng(seed)
    events = inject_noise(events, noise_rate, 0, int(t_us[-1]) + 1, rng)

    logger.debug("Generated scene", objects=len(objects), samples=n_samples, events=len(events))
    return Scene(events, ground_truths, max_radius)


def generate_sequence(
    shape: Shape,
    traj: Trajectory,
    camera: CameraModel,
    duration: float,
    noise_rate: float = 0.0,
    seed: int = 0,
    table: Optional[SpeedBinTable] = None,
) -> Tuple[EventStream, GroundTruth]:
    """Single-object scene: returns (events, ground truth)"""
    scene = generate_scene([SceneObject(shape, traj)], camera, duration, noise_rate, seed, table)
    return scene.events, scene.ground_truths[0]


def write_ground_truth(gt: GroundTruth, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(GT_COLUMNS)
        for i in range(len(gt)):
            vx, vy, vz = gt.velocity[i]
            writer.writerow(
                [
                    int(gt.t_us[i]),
                    repr(float(gt.cx[i])),
                    repr(float(gt.cy[i])),
                    repr(float(vx)),
                    repr(float(vy)),
                    repr(float(vz)),
                    repr(float(gt.speed[i])),
                    repr(float(gt.direction[i])),
                    int(gt.speed_bin[i]),
                ]
            )


def read_ground_truth(path: Union[str, Path]) -> GroundTruth:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != GT_COLUMNS:
            raise SimulationError(f"{path}: unexpected ground-truth header {header}")
        rows = [row for row in reader if row]

    if not rows:
        empty = np.zeros(0, dtype=np.float64)
        return GroundTruth(
            t_us=np.zeros(0, dtype=np.int64),
            cx=empty,
            cy=empty,
            velocity=np.zeros((0, 3)),
            speed=empty,
            direction=empty,
            speed_bin=np.zeros(0, dtype=np.int64),
        )

    cols = list(zip(*rows))
    return GroundTruth(
        t_us=np.array(cols[0], dtype=np.int64),
        cx=np.array(cols[1], dtype=np.float64),
        cy=np.array(cols[2], dtype=np.float64),
        velocity=np.stack([np.array(cols[c], dtype=np.float64) for c in (3, 4, 5)], axis=-1),
        speed=np.array(cols[6], dtype=np.float64),
        direction=np.array(cols[7], dtype=np.float64),
        speed_bin=np.array(cols[8], dtype=np.int64),
    )

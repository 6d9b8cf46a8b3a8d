"""
Camera Model

Pinhole projection, binary silhouette rendering and the log-intensity event
rule of a simplified DVS: a pixel emits one event when its log intensity
changes by at least theta between consecutive samples.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from matplotlib.path import Path as PolygonPath

from .speed_bins import SimulationError
from ..events import EventStream, Polarity

SHAPE_KINDS = ("square", "circle", "diamond", "star")

# Inner/outer radius ratio of the five-pointed star.
STAR_INNER_RATIO = 0.5

# Objects closer than this (m) are treated as behind the camera.
NEAR_PLANE = 1e-3


class NonPositiveIntensityError(SimulationError):
    """Log intensity is undefined for non-positive pixels"""


@dataclass(frozen=True)
class Shape:
    """A flat shape facing the camera; size is the half-extent in metres"""
    kind: str
    size: float = 0.025

    def __post_init__(self) -> None:
        if self.kind not in SHAPE_KINDS:
            raise SimulationError(f"unknown shape {self.kind!r}")
        if not self.size > 0:
            raise SimulationError(f"shape size must be positive, got {self.size}")


@dataclass(frozen=True)
class CameraModel:
    """Simplified event camera: 640x480 @ 20K samples/s, 60 deg horizontal FoV by default"""
    width: int = 640
    height: int = 480
    fov_deg: float = 60.0
    theta: float = 0.2
    sample_rate: float = 20000.0
    foreground: float = 0.8
    background: float = 0.2

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise SimulationError(f"invalid sensor size {self.width}x{self.height}")
        if not 0 < self.fov_deg < 180:
            raise SimulationError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if not self.theta > 0:
            raise SimulationError(f"theta must be positive, got {self.theta}")
        if not self.sample_rate > 0:
            raise SimulationError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.foreground <= 0 or self.background <= 0:
            raise NonPositiveIntensityError("foreground and background intensities must be positive")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)

    @property
    def principal_point(self) -> Tuple[float, float]:
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0

    @cached_property
    def pixel_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        """Pixel-centre image coordinates (x = column, y = row)"""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width]
        return xs.astype(np.float64), ys.astype(np.float64)

    def sample_time_us(self, index: int) -> int:
        return int(round(index * 1e6 / self.sample_rate))

    def project(self, position: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Image coordinates (u, v) and depth of world points, shape (..., 3)"""
        position = np.asarray(position, dtype=np.float64)
        X, Y, Z = position[..., 0], position[..., 1], position[..., 2]
        cx, cy = self.principal_point
        safe_z = np.where(Z > NEAR_PLANE, Z, np.nan)
        return cx + self.focal_px * X / safe_z, cy + self.focal_px * Y / safe_z, Z

    def project_velocity(self, position: np.ndarray, velocity: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Image-plane velocity (px/s) of points moving with the given world velocity"""
        position = np.asarray(position, dtype=np.float64)
        velocity = np.asarray(velocity, dtype=np.float64)
        X, Y, Z = position[..., 0], position[..., 1], position[..., 2]
        VX, VY, VZ = velocity[..., 0], velocity[..., 1], velocity[..., 2]
        f = self.focal_px
        return f * (VX * Z - X * VZ) / (Z * Z), f * (VY * Z - Y * VZ) / (Z * Z)

    def radius_px(self, shape: Shape, depth: float) -> float:
        return self.focal_px * shape.size / depth


def _star_polygon(radius: float) -> np.ndarray:
    angles = -math.pi / 2 + np.arange(10) * math.pi / 5
    radii = np.where(np.arange(10) % 2 == 0, radius, radius * STAR_INNER_RATIO)
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)


def silhouette(shape: Shape, position: np.ndarray, camera: CameraModel) -> np.ndarray:
    """Boolean H x W mask of pixels whose centres fall inside the projected shape"""
    u, v, z = camera.project(position)
    if not z > NEAR_PLANE:
        return np.zeros((camera.height, camera.width), dtype=bool)

    r = camera.radius_px(shape, float(z))
    xs, ys = camera.pixel_grid
    dx, dy = xs - float(u), ys - float(v)

    if shape.kind == "square":
        return np.maximum(np.abs(dx), np.abs(dy)) <= r
    if shape.kind == "circle":
        return dx * dx + dy * dy <= r * r
    if shape.kind == "diamond":
        return np.abs(dx) + np.abs(dy) <= r

    # star: test only the bounding box
    mask = np.zeros((camera.height, camera.width), dtype=bool)
    box = (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if box.any():
        points = np.stack([dx[box], dy[box]], axis=-1)
        mask[box] = PolygonPath(_star_polygon(r)).contains_points(points)
    return mask


def render_intensity(shape: Shape, position: np.ndarray, camera: CameraModel) -> np.ndarray:
    """H x W intensity frame: foreground inside the silhouette, background elsewhere"""
    frame = np.full((camera.height, camera.width), camera.background, dtype=np.float64)
    frame[silhouette(shape, position, camera)] = camera.foreground
    return frame


def emit_events(frame_prev: np.ndarray, frame_next: np.ndarray, t_next: int, theta: float) -> EventStream:
    """
    Events between two intensity frames, all stamped t_next.

    One event per pixel with |log I_next - log I_prev| >= theta; ON when the
    intensity rose, OFF when it fell. Events are in row-major pixel order.

    Raises:
        NonPositiveIntensityError: a frame holds a non-positive intensity
        SimulationError: frames differ in shape
    """
    if frame_prev.shape != frame_next.shape:
        raise SimulationError(f"frame shapes differ: {frame_prev.shape} vs {frame_next.shape}")
    if np.any(frame_prev <= 0) or np.any(frame_next <= 0):
        raise NonPositiveIntensityError("log intensity undefined for non-positive pixels")

    height, width = frame_next.shape
    delta = np.log(frame_next) - np.log(frame_prev)
    ys, xs = np.nonzero(np.abs(delta) >= theta)
    polarity = np.where(delta[ys, xs] > 0, Polarity.ON, Polarity.OFF)
    t = np.full(len(xs), t_next, dtype=np.uint64)
    return EventStream.from_arrays(xs, ys, t, polarity, width, height)

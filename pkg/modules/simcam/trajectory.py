"""
Trajectories

Closed object paths parameterized in cylindrical coordinates around an axis
parallel to the camera's optical axis. Each kind defines a radius profile
rho(s), an angle phi(s) and an axial (depth) offset z(s) over the normalized
lap parameter s in [0, 1), together with their analytic s-derivatives.

World frame = camera frame: X right, Y down, Z forward. Profiles are unit
sized; a trajectory scales one by `scale` metres, places it `depth` metres in
front of the camera and rotates it in the image plane by `orientation_deg`.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Tuple, Union

import numpy as np

from .speed_bins import SimulationError, SpeedBinTable

TWO_PI = 2.0 * math.pi

ArrayLike = Union[float, np.ndarray]


class Profile(NamedTuple):
    """Cylindrical coordinates and their derivatives with respect to s"""
    rho: np.ndarray
    drho: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    z: np.ndarray
    dz: np.ndarray


def _circle(s: np.ndarray) -> Profile:
    # rho = 1, phi = 2 pi s
    one = np.ones_like(s)
    return Profile(one, 0.0 * s, TWO_PI * s, TWO_PI * one, 0.0 * s, 0.0 * s)


def _lemniscate(s: np.ndarray) -> Profile:
    # Figure-eight in a polar wedge: rho = 3 + 0.25 sin(4 pi s), phi = 0.3 sin(2 pi s).
    # Never touches the axis; the crossing point sits at rho = 3, phi = 0.
    rho = 3.0 + 0.25 * np.sin(2 * TWO_PI * s)
    drho = 0.25 * 2 * TWO_PI * np.cos(2 * TWO_PI * s)
    phi = 0.3 * np.sin(TWO_PI * s)
    dphi = 0.3 * TWO_PI * np.cos(TWO_PI * s)
    return Profile(rho, drho, phi, dphi, 0.0 * s, 0.0 * s)


def _vertical_oval(s: np.ndarray) -> Profile:
    # Ellipse with semi-axes 0.7 (x) and 1.1 (y) in polar form:
    # rho(phi) = ab / sqrt(b^2 cos^2 phi + a^2 sin^2 phi), phi = 2 pi s.
    a, b = 0.7, 1.1
    phi = TWO_PI * s
    c, sn = np.cos(phi), np.sin(phi)
    d = (b * c) ** 2 + (a * sn) ** 2
    rho = a * b / np.sqrt(d)
    drho_dphi = -a * b * (a * a - b * b) * sn * c / d ** 1.5
    return Profile(rho, drho_dphi * TWO_PI, phi, TWO_PI * np.ones_like(s), 0.0 * s, 0.0 * s)


def _test_1(s: np.ndarray) -> Profile:
    # Limacon without inner loop, rho = 0.9 (1 + 0.3 cos phi), bobbing
    # 0.3 units in depth once per lap.
    phi = TWO_PI * s
    rho = 0.9 * (1.0 + 0.3 * np.cos(phi))
    drho = -0.9 * 0.3 * np.sin(phi) * TWO_PI
    z = 0.3 * np.sin(phi)
    dz = 0.3 * TWO_PI * np.cos(phi)
    return Profile(rho, drho, phi, TWO_PI * np.ones_like(s), z, dz)


def _test_2(s: np.ndarray) -> Profile:
    # Three-lobed loop, rho = 0.9 (1 + 0.2 cos 3 phi), bobbing 0.2 units
    # in depth twice per lap.
    phi = TWO_PI * s
    rho = 0.9 * (1.0 + 0.2 * np.cos(3 * phi))
    drho = -0.9 * 0.2 * 3 * np.sin(3 * phi) * TWO_PI
    z = 0.2 * np.sin(2 * phi)
    dz = 0.2 * 2 * TWO_PI * np.cos(2 * phi)
    return Profile(rho, drho, phi, TWO_PI * np.ones_like(s), z, dz)


# kind -> (profile, in-plane offset that moves the path's centre onto the axis)
PROFILES: Dict[str, Tuple[Callable[[np.ndarray], Profile], Tuple[float, float]]] = {
    "circle": (_circle, (0.0, 0.0)),
    "lemniscate": (_lemniscate, (3.0, 0.0)),
    "vertical-oval": (_vertical_oval, (0.0, 0.0)),
    "test-1": (_test_1, (0.135, 0.0)),
    "test-2": (_test_2, (0.0, 0.0)),
}

TRAIN_TRAJECTORIES = ("circle", "lemniscate", "vertical-oval")
TEST_TRAJECTORIES = ("test-1", "test-2")
ORIENTATIONS = (0.0, 45.0, 90.0, 145.0)
SENSES = ("clockwise", "anticlockwise")


@dataclass(frozen=True)
class Trajectory:
    """
    A closed path traversed once per lap_time seconds.

    lap_time may be math.inf for a static object parked at `phase`.
    """
    kind: str
    lap_time: float = 1.0
    orientation_deg: float = 0.0
    sense: str = "anticlockwise"
    phase: float = 0.0
    scale: float = 0.1
    depth: float = 0.3

    def __post_init__(self) -> None:
        if self.kind not in PROFILES:
            raise SimulationError(f"unknown trajectory kind {self.kind!r}")
        if not self.lap_time > 0:
            raise SimulationError(f"lap_time must be positive, got {self.lap_time}")
        if self.sense not in SENSES:
            raise SimulationError(f"sense must be one of {SENSES}, got {self.sense!r}")
        if not self.scale > 0:
            raise SimulationError(f"scale must be positive, got {self.scale}")
        if not self.depth > 0:
            raise SimulationError(f"depth must be positive, got {self.depth}")

    @property
    def sign(self) -> float:
        """Direction of travel in s: anticlockwise means phi increases with time"""
        return 1.0 if self.sense == "anticlockwise" else -1.0

    def lap_parameter(self, t: ArrayLike) -> np.ndarray:
        return self.phase + self.sign * np.asarray(t, dtype=np.float64) / self.lap_time


def _shape_derivative(traj: Trajectory, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Position and d(position)/ds at lap parameters s, shape (..., 3)"""
    profile_fn, (ox, oy) = PROFILES[traj.kind]
    pr = profile_fn(s)

    cos_phi, sin_phi = np.cos(pr.phi), np.sin(pr.phi)
    x = pr.rho * cos_phi - ox
    y = pr.rho * sin_phi - oy
    dx = pr.drho * cos_phi - pr.rho * sin_phi * pr.dphi
    dy = pr.drho * sin_phi + pr.rho * cos_phi * pr.dphi

    theta = math.radians(traj.orientation_deg)
    c, sn = math.cos(theta), math.sin(theta)
    k = traj.scale
    pos = np.stack([k * (c * x - sn * y), k * (sn * x + c * y), traj.depth + k * pr.z], axis=-1)
    dpos = np.stack([k * (c * dx - sn * dy), k * (sn * dx + c * dy), k * pr.dz], axis=-1)
    return pos, dpos


def trajectory_state(traj: Trajectory, t: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Position (m) and velocity (m/s) at time t seconds.

    Velocity is the analytic derivative of the parameterization. Works on
    scalars (returns shape (3,)) and arrays of times (shape (n, 3)).
    """
    s = traj.lap_parameter(t)
    pos, dpos = _shape_derivative(traj, s)
    ds_dt = traj.sign * (1.0 / traj.lap_time)
    return pos, dpos * ds_dt


def speed_profile(traj: Trajectory, n: int = 2048) -> np.ndarray:
    """|d(position)/ds| over one lap; the speed at lap time T is this divided by T"""
    s = np.arange(n, dtype=np.float64) / n
    _, dpos = _shape_derivative(traj, s)
    return np.sqrt(np.sum(dpos * dpos, axis=-1))


def fit_lap_time(traj: Trajectory, bin_k: int, table: SpeedBinTable, n_candidates: int = 512) -> float:
    """
    Lap time that keeps the speed profile of `traj` inside bin k.

    The top bin is capped at the table's programmed maximum. Candidates are
    swept on a log grid; the winner maximizes the fraction of the lap inside
    the range, ties broken towards the bin's representative speed.
    """
    lo, hi = table.programmed_range(bin_k)
    profile = speed_profile(traj)
    g_min, g_max = float(profile.min()), float(profile.max())

    candidates = np.geomspace(g_min / hi, g_max / lo, n_candidates)
    speeds = profile[None, :] / candidates[:, None]
    fraction = np.mean((speeds >= lo) & (speeds < hi), axis=1)

    typical = math.sqrt(g_min * g_max) / candidates
    off_target = np.abs(np.log(typical / table.representative_speed(bin_k)))

    best = np.lexsort((off_target, -fraction))[0]
    return float(candidates[best])

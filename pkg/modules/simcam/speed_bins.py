"""
Speed Bins

Discretization of object speed into N contiguous ranges. Bin indices are
1-based; index 0 is the sub-threshold sentinel for speeds below bin 1.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np


class SimulationError(ValueError):
    """Base class for simulation errors"""


class InvalidTableError(SimulationError):
    """Speed bin table is not contiguous and increasing"""


class SpeedOutOfRangeError(SimulationError):
    """Speed at or above the top of the table"""


# Min/max speeds (m/s) of the four bins.
DEFAULT_RANGES: Tuple[Tuple[float, float], ...] = ((1.0, 18.0), (18.0, 42.0), (42.0, 84.0), (84.0, 500.0))

# Fastest speed the simulator ever programs; the top bin's 500 m/s only
# guards against stray events.
PROGRAMMED_MAX_SPEED = 144.0


@dataclass(frozen=True)
class SpeedBinTable:
    """Ordered (min, max) speed ranges, lower-inclusive and upper-exclusive"""
    ranges: Tuple[Tuple[float, float], ...] = DEFAULT_RANGES
    programmed_max: float = PROGRAMMED_MAX_SPEED

    def __post_init__(self) -> None:
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        object.__setattr__(self, "ranges", ranges)
        if not ranges:
            raise InvalidTableError("speed bin table is empty")
        for k, (lo, hi) in enumerate(ranges, start=1):
            if not lo < hi:
                raise InvalidTableError(f"bin {k}: min {lo} must be below max {hi}")
            if k > 1 and lo != ranges[k - 2][1]:
                raise InvalidTableError(f"bin {k}: min {lo} does not meet previous max {ranges[k - 2][1]}")
        if not ranges[-1][0] < self.programmed_max <= ranges[-1][1]:
            raise InvalidTableError(f"programmed max {self.programmed_max} outside the top bin")

    @classmethod
    def from_ranges(cls, ranges: Sequence[Sequence[float]], programmed_max: float = PROGRAMMED_MAX_SPEED) -> "SpeedBinTable":
        return cls(tuple((lo, hi) for lo, hi in ranges), programmed_max)

    @property
    def n_bins(self) -> int:
        return len(self.ranges)

    @property
    def top_speed(self) -> float:
        return self.ranges[-1][1]

    def range_of(self, k: int) -> Tuple[float, float]:
        if not 1 <= k <= self.n_bins:
            raise SimulationError(f"bin index {k} outside 1..{self.n_bins}")
        return self.ranges[k - 1]

    def min_speed(self, k: int) -> float:
        return self.range_of(k)[0]

    def programmed_range(self, k: int) -> Tuple[float, float]:
        """Bin range with the top bin capped at the programmed maximum"""
        lo, hi = self.range_of(k)
        return lo, min(hi, self.programmed_max)

    def representative_speed(self, k: int) -> float:
        """Arithmetic midpoint of the programmed range of bin k"""
        lo, hi = self.programmed_range(k)
        return (lo + hi) / 2.0

    def edges(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.ranges] + [self.top_speed])


def speed_to_bin(speed: float, table: SpeedBinTable) -> int:
    """
    Look up the speed bin of a speed in m/s.

    Returns 0 for speeds below the first bin.

    Raises:
        SpeedOutOfRangeError: speed >= the top bin's max
    """
    if not speed < table.top_speed:
        raise SpeedOutOfRangeError(f"speed {speed} m/s at or above {table.top_speed} m/s")
    return int(np.searchsorted(table.edges(), speed, side="right"))


def speeds_to_bins(speeds: np.ndarray, table: SpeedBinTable) -> np.ndarray:
    """Vectorized speed_to_bin"""
    speeds = np.asarray(speeds, dtype=np.float64)
    if speeds.size and not np.all(speeds < table.top_speed):
        raise SpeedOutOfRangeError(f"speed {speeds.max()} m/s at or above {table.top_speed} m/s")
    return np.searchsorted(table.edges(), speeds, side="right").astype(np.int64)

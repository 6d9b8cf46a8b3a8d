"""
Event Binning

Discretizes the events of one time window into B temporal bins, each a
2-channel (OFF, ON) count grid. Bins are the SNN timesteps.
"""

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from .stream import EventError, EventStream, OutOfGridError


@dataclass(frozen=True, eq=False)
class BinnedVolume:
    """B x 2 x H x W event counts for the window [t_start, t_start + dt)"""
    bins: np.ndarray
    t_start: int
    dt: int

    def __post_init__(self) -> None:
        if self.bins.ndim != 4 or self.bins.shape[1] != 2:
            raise EventError(f"bins must have shape (B, 2, H, W), got {self.bins.shape}")
        self.bins.setflags(write=False)

    @property
    def B(self) -> int:
        return self.bins.shape[0]

    @property
    def height(self) -> int:
        return self.bins.shape[2]

    @property
    def width(self) -> int:
        return self.bins.shape[3]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def total(self) -> int:
        return int(self.bins.sum())

    def occupancy(self) -> np.ndarray:
        """Binary per-bin, per-polarity view used as SNN input"""
        return (self.bins > 0).astype(np.float64)

    def event_grid(self) -> np.ndarray:
        """H x W binary grid of pixels with any event in the window"""
        return (self.bins.sum(axis=(0, 1)) > 0).astype(np.uint8)

    def with_bins(self, bins: np.ndarray) -> "BinnedVolume":
        return BinnedVolume(bins, self.t_start, self.dt)


def bin_events(
    events: EventStream,
    t_start: int,
    dt: int,
    B: int,
    height: int,
    width: int,
) -> BinnedVolume:
    """
    Bin the events of [t_start, t_start + dt) into a BinnedVolume.

    Event time t lands in bin floor((t - t_start) * B / dt), clamped to B - 1.
    The arithmetic is integral, so assignment is exact.

    Raises:
        EventError: dt <= 0 or B < 1
        OutOfGridError: an in-window event lies outside the height x width grid
    """
    if dt <= 0:
        raise EventError(f"dt must be positive, got {dt}")
    if B < 1:
        raise EventError(f"B must be at least 1, got {B}")

    bins = np.zeros((B, 2, height, width), dtype=np.int32)

    t = events.t
    lo = int(np.searchsorted(t, t_start, side="left"))
    hi = int(np.searchsorted(t, t_start + dt, side="left"))
    if hi <= lo:
        return BinnedVolume(bins, t_start, dt)

    window = events.records[lo:hi]
    xs = window["x"].astype(np.int64)
    ys = window["y"].astype(np.int64)

    outside = np.flatnonzero((xs >= width) | (ys >= height))
    if outside.size:
        i = int(outside[0])
        raise OutOfGridError(lo + i, int(xs[i]), int(ys[i]), width, height)

    offsets = window["t"].astype(np.int64) - t_start
    idx = np.minimum(offsets * B // dt, B - 1)
    np.add.at(bins, (idx, window["p"].astype(np.int64), ys, xs), 1)

    return BinnedVolume(bins, t_start, dt)


def iter_windows(t_end: int, dt: int, t_begin: int = 0) -> Iterator[int]:
    """Start times of the consecutive full windows tiling [t_begin, t_end)"""
    t = t_begin
    while t + dt <= t_end:
        yield t
        t += dt

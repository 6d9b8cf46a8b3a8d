"""
Event Stream

A single AER event and the immutable, time-sorted stream that holds many of
them as one packed numpy structured array.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np

# Packed little-endian record; identical to the on-disk layout.
EVENT_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<u8"), ("p", "u1")])


class EventError(ValueError):
    """Base class for event data errors"""


class OutOfGridError(EventError):
    """An event lies outside the sensor grid"""

    def __init__(self, index: int, x: int, y: int, width: int, height: int):
        self.index = index
        super().__init__(f"event {index} at (x={x}, y={y}) outside {width}x{height} grid")


class Polarity(IntEnum):
    OFF = 0
    ON = 1


@dataclass(frozen=True)
class Event:
    """Represents a single AER event"""
    x: int
    y: int
    t: int
    p: Polarity


@dataclass(frozen=True, eq=False)
class EventStream:
    """
    Time-sorted event stream for a width x height sensor.

    The record array is made read-only on construction; use the factory
    methods to build new streams instead of mutating one.
    """
    records: np.ndarray
    width: int
    height: int

    def __post_init__(self) -> None:
        records = np.ascontiguousarray(self.records, dtype=EVENT_DTYPE)
        records.setflags(write=False)
        object.__setattr__(self, "records", records)

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls(np.zeros(0, dtype=EVENT_DTYPE), width, height)

    @classmethod
    def from_events(cls, events: Iterable[Event], width: int, height: int) -> "EventStream":
        rows = [(e.x, e.y, e.t, int(e.p)) for e in events]
        return cls(np.array(rows, dtype=EVENT_DTYPE), width, height)

    @classmethod
    def from_arrays(
        cls,
        x: np.ndarray,
        y: np.ndarray,
        t: np.ndarray,
        p: np.ndarray,
        width: int,
        height: int,
    ) -> "EventStream":
        records = np.empty(len(t), dtype=EVENT_DTYPE)
        records["x"] = x
        records["y"] = y
        records["t"] = t
        records["p"] = p
        return cls(records, width, height)

    @classmethod
    def merge(cls, streams: Sequence["EventStream"]) -> "EventStream":
        """Merge streams into one, keeping earlier streams first on timestamp ties"""
        if not streams:
            raise EventError("merge needs at least one stream")
        width, height = streams[0].width, streams[0].height
        records = np.concatenate([s.records for s in streams])
        order = np.argsort(records["t"], kind="stable")
        return cls(records[order], width, height)

    @property
    def x(self) -> np.ndarray:
        return self.records["x"]

    @property
    def y(self) -> np.ndarray:
        return self.records["y"]

    @property
    def t(self) -> np.ndarray:
        return self.records["t"]

    @property
    def p(self) -> np.ndarray:
        return self.records["p"]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, p in self.records.tolist():
            yield Event(x, y, t, Polarity(p))

    def __getitem__(self, index: int) -> Event:
        x, y, t, p = self.records[index].tolist()
        return Event(x, y, t, Polarity(p))

    def is_sorted(self) -> bool:
        t = self.records["t"]
        return bool(np.all(t[1:] >= t[:-1]))

    def first_unsorted(self) -> int:
        """Index of the first event earlier than its predecessor, or -1"""
        t = self.records["t"]
        bad = np.flatnonzero(t[1:] < t[:-1])
        return int(bad[0]) + 1 if bad.size else -1

    def window(self, t_start: int, t_end: int) -> "EventStream":
        """Events with t_start <= t < t_end (requires a sorted stream)"""
        t = self.records["t"]
        lo = int(np.searchsorted(t, t_start, side="left"))
        hi = int(np.searchsorted(t, t_end, side="left"))
        return EventStream(self.records[lo:hi], self.width, self.height)

    def duration_us(self) -> int:
        return int(self.records["t"][-1]) + 1 if len(self) else 0

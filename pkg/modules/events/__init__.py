"""
Event Core Module

AER event data model, time-window binning and the binary event file format.
"""

from .stream import EVENT_DTYPE, Event, EventError, EventStream, OutOfGridError, Polarity
from .binning import BinnedVolume, bin_events, iter_windows
from .codec import (
    BadMagicError,
    EventFileError,
    TrailingBytesError,
    TruncatedFileError,
    UnsortedTimestampsError,
    UnsupportedVersionError,
    read_events,
    write_events,
)

__all__ = [
    "EVENT_DTYPE",
    "Event",
    "EventError",
    "EventStream",
    "OutOfGridError",
    "Polarity",
    "BinnedVolume",
    "bin_events",
    "iter_windows",
    "BadMagicError",
    "EventFileError",
    "TrailingBytesError",
    "TruncatedFileError",
    "UnsortedTimestampsError",
    "UnsupportedVersionError",
    "read_events",
    "write_events",
]

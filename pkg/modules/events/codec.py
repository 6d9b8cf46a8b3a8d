"""
Event File Codec

Bit-exact binary event files: a 20-byte little-endian header
{magic "TOFE", version u32, width u16, height u16, count u64} followed by
13-byte packed records {x u16, y u16, t u64 (us), p u8}.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .stream import EVENT_DTYPE, EventError, EventStream
from ..logger import get_logger

logger = get_logger(__name__)

MAGIC = b"TOFE"
VERSION = 1
HEADER = struct.Struct("<4sIHHQ")


class EventFileError(EventError):
    """Base class for event file errors"""


class BadMagicError(EventFileError):
    """File does not start with the TOFE magic"""


class UnsupportedVersionError(EventFileError):
    """File version is not understood by this reader"""


class TruncatedFileError(EventFileError):
    """File is shorter than its header declares"""


class TrailingBytesError(EventFileError):
    """File is longer than its header declares"""


class UnsortedTimestampsError(EventFileError):
    """Event timestamps decrease somewhere in the stream"""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"timestamps not sorted at event {index}")


def write_events(stream: EventStream, path: Union[str, Path]) -> None:
    """
    Write a sorted event stream to path.

    Raises:
        UnsortedTimestampsError: stream is not sorted by t
    """
    bad = stream.first_unsorted()
    if bad >= 0:
        raise UnsortedTimestampsError(bad)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, stream.width, stream.height, len(stream)))
        f.write(stream.records.tobytes())

    logger.debug("Wrote events", path=str(path), count=len(stream))


def read_events(path: Union[str, Path]) -> EventStream:
    """
    Read an event file written by write_events.

    Raises:
        BadMagicError, UnsupportedVersionError, TruncatedFileError,
        TrailingBytesError, UnsortedTimestampsError
    """
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagicError(f"{path}: bad magic {data[:4]!r}")
        raise TruncatedFileError(f"{path}: {len(data)} bytes, header needs {HEADER.size}")

    magic, version, width, height, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, expected {VERSION}")

    expected = HEADER.size + count * EVENT_DTYPE.itemsize
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, header declares {expected}")
    if len(data) > expected:
        raise TrailingBytesError(f"{path}: {len(data) - expected} trailing bytes after {count} events")

    records = np.frombuffer(data, dtype=EVENT_DTYPE, count=count, offset=HEADER.size).copy()
    stream = EventStream(records, width, height)

    bad = stream.first_unsorted()
    if bad >= 0:
        raise UnsortedTimestampsError(bad)
    return stream

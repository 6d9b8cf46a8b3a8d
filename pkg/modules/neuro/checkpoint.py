"""
Checkpoint Files

    magic "TOFC" | version u32 | meta_len u32 | meta (UTF-8 JSON)
    n_params u32
    per parameter: name_len u16 | name | ndim u8 | dims u32 * ndim | float32 LE data

Parameters are written in name order, so saving the same parameters twice
gives identical bytes.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from .errors import CheckpointError
from ..logger import get_logger

logger = get_logger(__name__)

MAGIC = b"TOFC"
VERSION = 1
_PREAMBLE = struct.Struct("<4sII")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_U8 = struct.Struct("<B")


def save_checkpoint(
    path: Union[str, Path],
    params: Mapping[str, np.ndarray],
    meta: Mapping[str, Any],
) -> None:
    meta_bytes = json.dumps(dict(meta), sort_keys=True).encode("utf-8")
    chunks = [_PREAMBLE.pack(MAGIC, VERSION, len(meta_bytes)), meta_bytes, _U32.pack(len(params))]
    for name in sorted(params):
        value = np.asarray(params[name])
        encoded = name.encode("utf-8")
        chunks.append(_U16.pack(len(encoded)) + encoded + _U8.pack(value.ndim))
        chunks.extend(_U32.pack(d) for d in value.shape)
        chunks.append(value.astype("<f4").tobytes())

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    logger.info("Saved checkpoint", path=str(path), params=len(params))


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError(f"{self.path}: truncated at byte {self.offset}")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: struct.Struct) -> Tuple[Any, ...]:
        return fmt.unpack(self.take(fmt.size))


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        (parameters as float64 arrays, metadata)

    Raises:
        FileNotFoundError: path does not exist
        CheckpointError: bad magic, unknown version, truncated or malformed file
    """
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)

    magic, version, meta_len = reader.unpack(_PREAMBLE)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        meta = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable metadata: {e}") from e

    params: Dict[str, np.ndarray] = {}
    (count,) = reader.unpack(_U32)
    for _ in range(count):
        (name_len,) = reader.unpack(_U16)
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack(_U8)
        shape = tuple(reader.unpack(_U32)[0] for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        blob = reader.take(4 * size)
        params[name] = np.frombuffer(blob, dtype="<f4").reshape(shape).astype(np.float64)

    if reader.offset != len(reader.data):
        raise CheckpointError(f"{path}: {len(reader.data) - reader.offset} trailing bytes")
    return params, meta

"""
CheckpointContainer: a named-tensor binary file with a trailing CRC32.

Layout (little-endian):
    magic "DPAB1" | version u32 | meta_len u32 | meta JSON | count u32
    | count x (name_len u16, name, dtype u8, ndim u8, dims u32*ndim, offset u64, nbytes u64)
    | payload | crc32 u32 over everything before it
"""
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

MAGIC = b"DPAB1"
FORMAT_VERSION = 1

DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("u1"), 2: np.dtype("<f8")}

_u16 = struct.Struct("<H")
_u32 = struct.Struct("<I")
_u64 = struct.Struct("<Q")
_entry_head = struct.Struct("<BB")


class CheckpointError(Exception):
    """Raised when a container is malformed, corrupt or inconsistent."""
    pass


def _tag_for(array: np.ndarray) -> int:
    if array.dtype == np.uint8:
        return 1
    if array.dtype == np.float64:
        return 2
    return 0


@dataclass
class CheckpointContainer:
    """
    Named tensors plus a JSON metadata block.

    Arrays are stored as f32 unless they are uint8 (datasets) or float64
    (exact training-resume state); every other dtype is cast to f32.
    """
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        meta = json.dumps(self.metadata, sort_keys=True).encode()
        header = [MAGIC, _u32.pack(FORMAT_VERSION), _u32.pack(len(meta)), meta, _u32.pack(len(self.tensors))]
        payload = []
        offset = 0
        for name, array in self.tensors.items():
            array = np.asarray(array)
            tag = _tag_for(array)
            blob = np.ascontiguousarray(array, dtype=DTYPE_TAGS[tag]).tobytes()
            encoded = name.encode()
            header.append(_u16.pack(len(encoded)) + encoded)
            header.append(_entry_head.pack(tag, array.ndim))
            header.append(b"".join(_u32.pack(d) for d in array.shape))
            header.append(_u64.pack(offset) + _u64.pack(len(blob)))
            payload.append(blob)
            offset += len(blob)
        body = b"".join(header) + b"".join(payload)
        return body + _u32.pack(zlib.crc32(body))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CheckpointContainer":
        if len(raw) < len(MAGIC) + 16 or raw[:len(MAGIC)] != MAGIC:
            raise CheckpointError("Not a DPAB1 container (bad magic)")
        body, (crc,) = raw[:-4], _u32.unpack(raw[-4:])
        if zlib.crc32(body) != crc:
            raise CheckpointError("CRC32 mismatch: container is corrupt")

        pos = len(MAGIC)

        def take(n: int) -> bytes:
            nonlocal pos
            if pos + n > len(body):
                raise CheckpointError("Truncated container header")
            chunk = body[pos:pos + n]
            pos += n
            return chunk

        (version,) = _u32.unpack(take(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"Unsupported format version {version}")
        (meta_len,) = _u32.unpack(take(4))
        try:
            metadata = json.loads(take(meta_len).decode()) if meta_len else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"Invalid metadata block: {e}")
        (count,) = _u32.unpack(take(4))

        entries = []
        for _ in range(count):
            (name_len,) = _u16.unpack(take(2))
            name = take(name_len).decode()
            tag, ndim = _entry_head.unpack(take(2))
            if tag not in DTYPE_TAGS:
                raise CheckpointError(f"Unknown dtype tag {tag} for '{name}'")
            shape = tuple(_u32.unpack(take(4))[0] for _ in range(ndim))
            (offset,) = _u64.unpack(take(8))
            (nbytes,) = _u64.unpack(take(8))
            entries.append((name, tag, shape, offset, nbytes))

        payload = body[pos:]
        tensors: dict[str, np.ndarray] = {}
        for name, tag, shape, offset, nbytes in entries:
            if name in tensors:
                raise CheckpointError(f"Duplicate tensor name '{name}'")
            dtype = DTYPE_TAGS[tag]
            if nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize or offset + nbytes > len(payload):
                raise CheckpointError(f"Tensor '{name}' has out-of-bounds or inconsistent extent")
            tensors[name] = np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize,
                                          offset=offset).reshape(shape).copy()
        return cls(tensors, metadata)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CheckpointContainer":
        return cls.from_bytes(Path(path).read_bytes())

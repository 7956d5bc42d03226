"""Binary checkpoint files: a flat, ordered list of named float64 arrays.

Layout (all integers little-endian):

    magic   5 bytes  b"STFC1"
    version u32      currently 1
    count   u32      number of parameters
    per parameter:
        name_len u16, name utf-8 bytes
        ndim     u8,  dims u32 * ndim
        values   float64 little-endian, row-major

The writer preserves parameter order, so identical parameter sets produce
byte-identical files.
"""

import struct

import numpy as np

MAGIC = b"STFC1"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_arrays(path, named_arrays):
    """Write an ordered sequence of (name, ndarray) pairs."""
    items = list(named_arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(items)))
        for name, arr in items:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_arrays(path):
    """Read a checkpoint back as an ordered dict name -> float64 ndarray."""
    out = {}
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise CheckpointError(f"{path}: truncated data for parameter {name!r}")
            out[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after last parameter")
    return out

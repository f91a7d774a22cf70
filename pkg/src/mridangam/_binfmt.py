"""Little-endian binary container shared by model, template and SVM files.

Layout: 4-byte magic, ``<u4`` version, then type-specific header fields,
then arrays.  Each array is written as ``<u4 ndim``, ``ndim`` x ``<u4``
shape, and the ``<f4`` data in C order.
"""

from __future__ import annotations

import struct

import numpy as np

VERSION = 1


def write_header(fh, magic: bytes) -> None:
    fh.write(magic)
    fh.write(struct.pack("<I", VERSION))


def read_header(buf: bytes, magic: bytes, path) -> int:
    if buf[:4] != magic:
        raise ValueError(f"{path}: bad magic {buf[:4]!r}, expected {magic!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    return 8


def write_arrays(fh, arrays) -> None:
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_arrays(buf: bytes, offset: int, count: int, path):
    out = []
    for _ in range(count):
        try:
            (ndim,) = struct.unpack_from("<I", buf, offset)
            shape = struct.unpack_from(f"<{ndim}I", buf, offset + 4)
        except struct.error:
            raise ValueError(f"{path}: truncated file") from None
        offset += 4 + 4 * ndim
        size = int(np.prod(shape)) if shape else 1
        if offset + 4 * size > len(buf):
            raise ValueError(f"{path}: truncated file")
        out.append(np.frombuffer(buf, dtype="<f4", count=size, offset=offset).reshape(shape).copy())
        offset += 4 * size
    return out, offset

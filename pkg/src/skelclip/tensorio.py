"""Binary tensor container used for clips, features and model checkpoints.

Layout: magic ``SKTF``, version byte 1, one dtype code byte (0 = float32,
1 = uint8), one rank byte, ``rank`` little-endian uint32 dims, then the
row-major payload in little-endian order. Tensors can be concatenated in a
single stream; readers consume exactly one tensor per call.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import TensorFormatError

MAGIC = b"SKTF"
VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_CODE_FOR_KIND = {"f": 0, "u": 1}


def write_tensor(dest: str | Path | BinaryIO, arr: np.ndarray) -> None:
    """Write one tensor. Accepts float32/float64 (stored as f32) or uint8."""
    arr = np.asarray(arr)
    if arr.dtype == np.float64:
        arr = arr.astype(np.float32)
    if arr.dtype == np.float32:
        code, out = 0, arr.astype("<f4")
    elif arr.dtype == np.uint8:
        code, out = 1, arr
    else:
        raise TensorFormatError(f"unsupported dtype {arr.dtype}; use float32/float64 or uint8")
    if arr.ndim > 255:
        raise TensorFormatError("rank exceeds 255")
    header = MAGIC + struct.pack("<BBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(out).tobytes()
    if hasattr(dest, "write"):
        dest.write(header + payload)
    else:
        with open(dest, "wb") as fh:
            fh.write(header + payload)


def read_tensor(src: str | Path | BinaryIO) -> np.ndarray:
    """Read exactly one tensor from a file or an open binary stream."""
    if hasattr(src, "read"):
        return _read_stream(src)
    with open(src, "rb") as fh:
        arr = _read_stream(fh)
        if fh.read(1):
            raise TensorFormatError("trailing bytes after tensor payload")
        return arr


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TensorFormatError(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data


def _read_stream(fh: BinaryIO) -> np.ndarray:
    if _read_exact(fh, 4) != MAGIC:
        raise TensorFormatError("bad magic; not a SKTF tensor")
    version, code, rank = struct.unpack("<BBB", _read_exact(fh, 3))
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if code not in _DTYPE_CODES:
        raise TensorFormatError(f"unknown dtype code {code}")
    dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank))
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload = _read_exact(fh, count * dtype.itemsize)
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    if code == 0:
        arr = arr.astype(np.float32)
    else:
        arr = arr.copy()
    return arr

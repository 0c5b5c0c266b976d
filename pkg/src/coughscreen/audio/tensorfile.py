"""Binary tensor cache format.

Layout: magic "CTEN" | u32 version=1 | u8 dtype code (0=f32) | u8 ndim |
u64 dims[ndim] | row-major little-endian payload.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"CTEN"
VERSION = 1
_DTYPES = {0: np.dtype("<f4")}


def write_tensor(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBB", VERSION, 0, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 10 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad tensor magic")
    version, dtype_code, ndim = struct.unpack("<IBB", data[4:10])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported tensor version {version}")
    if dtype_code not in _DTYPES:
        raise CheckpointError(f"{path}: unknown dtype code {dtype_code}")
    header_end = 10 + 8 * ndim
    if len(data) < header_end:
        raise CheckpointError(f"{path}: truncated tensor header")
    dims = struct.unpack(f"<{ndim}Q", data[10:header_end])
    dtype = _DTYPES[dtype_code]
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[header_end:]
    if len(payload) != expected:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()

"""Binary tensor files.

Layout (little-endian): magic ``b"TNSR"``, uint32 dtype code, uint32 rank,
``rank`` uint64 dimensions, then the row-major payload.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

MAGIC = b"TNSR"
DTYPES = {0: np.float32, 1: np.float64, 2: np.int32, 3: np.int64}
CODES = {np.dtype(v): k for k, v in DTYPES.items()}


def write_tensor(path: Union[str, Path], arr) -> None:
    a = np.asarray(arr)
    if a.dtype not in CODES:
        raise ValueError(f"unsupported dtype {a.dtype}")
    header = MAGIC + struct.pack("<II", CODES[a.dtype], a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())


def read_tensor(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a tensor file")
    code, rank = struct.unpack_from("<II", data, 4)
    if code not in DTYPES:
        raise ValueError(f"{path}: unknown dtype code {code}")
    dims = struct.unpack_from(f"<{rank}Q", data, 12)
    off = 12 + 8 * rank
    dt = np.dtype(DTYPES[code]).newbyteorder("<")
    count = int(np.prod(dims, dtype=np.int64))
    payload = np.frombuffer(data, dtype=dt, count=count, offset=off)
    return payload.astype(DTYPES[code]).reshape(dims)

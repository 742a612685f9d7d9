"""FDMP feature-dump files.

Layout (little-endian)::

    offset  size  field
    0       4     magic b"FDMP"
    4       4     version (uint32, = 1)
    8       1     dtype (uint8: 0 = float32, 1 = float64)
    9       3     reserved, zero
    12      16    B, C, H, W (uint32 each)
    28      ...   row-major payload, B*C*H*W elements
"""

import math
import struct

import numpy as np

from .errors import FormatError
from .tensor import as_feature_map

MAGIC = b"FDMP"
VERSION = 1
HEADER = struct.Struct("<4sIB3s4I")
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
DTYPE_CODES = {"float32": 0, "f4": 0, "float64": 1, "f8": 1}


def encode(x, dtype="float64"):
    x = as_feature_map(x)
    if isinstance(dtype, str):
        if dtype not in DTYPE_CODES:
            raise ValueError(f"unsupported dtype {dtype!r}")
        code = DTYPE_CODES[dtype]
    else:
        code = int(dtype)
    if code not in DTYPES:
        raise ValueError(f"unsupported dtype code {code}")
    header = HEADER.pack(MAGIC, VERSION, code, b"\0\0\0", *x.shape)
    return header + x.astype(DTYPES[code]).tobytes()


def decode(buf):
    buf = memoryview(buf)
    if len(buf) < HEADER.size:
        raise FormatError(f"header needs {HEADER.size} bytes, file has {len(buf)}", len(buf))
    magic, version, code, reserved, *dims = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {bytes(magic)!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if code not in DTYPES:
        raise FormatError(f"unknown dtype code {code}", 8)
    if reserved != b"\0\0\0":
        raise FormatError("reserved bytes must be zero", 9)
    for i, d in enumerate(dims):
        if d < 1:
            raise FormatError(f"dimension {i} is zero", 12 + 4 * i)
    dt = DTYPES[code]
    expected = math.prod(dims) * dt.itemsize
    actual = len(buf) - HEADER.size
    if actual != expected:
        raise FormatError(
            f"payload is {actual} bytes, expected {expected} for dims {tuple(dims)}",
            HEADER.size + min(actual, expected),
        )
    data = np.frombuffer(buf, dtype=dt, offset=HEADER.size).reshape(dims)
    return data.astype(np.float64)


def write_fdmp(path, x, dtype="float64"):
    with open(path, "wb") as fh:
        fh.write(encode(x, dtype))


def read_fdmp(path):
    with open(path, "rb") as fh:
        return decode(fh.read())

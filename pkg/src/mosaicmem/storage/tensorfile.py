# storage/tensorfile.py
"""
MMTB テンソルファイル

    magic   4 bytes  b"MMTB"
    version u16 LE   (=1)
    dtype   u8       0=f32, 1=f64, 2=u8
    ndim    u8
    dims    u32 LE × ndim
    payload row-major, little-endian
"""
from __future__ import annotations
import pathlib
import struct

import numpy as np

MAGIC = b"MMTB"
VERSION = 1

_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_CODE_OF = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.uint8): 2}


class TensorFormatError(OSError):
    """ヘッダ不正・payload 長不一致など"""


def encode_tensor(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    code = _CODE_OF.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise ValueError(f"unsupported dtype: {arr.dtype}")
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    header = MAGIC + struct.pack("<HBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_CODES[code]).tobytes()


def decode_tensor(data: bytes, name: str = "<bytes>") -> np.ndarray:
    if len(data) < 8 or data[:4] != MAGIC:
        raise TensorFormatError(f"{name}: bad magic")
    version, code, ndim = struct.unpack_from("<HBB", data, 4)
    if version != VERSION:
        raise TensorFormatError(f"{name}: unsupported version {version}")
    if code not in _CODES:
        raise TensorFormatError(f"{name}: unknown dtype code {code}")
    offset = 8 + 4 * ndim
    if len(data) < offset:
        raise TensorFormatError(f"{name}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    dtype = _CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(data) - offset != expected:
        raise TensorFormatError(
            f"{name}: payload is {len(data) - offset} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype=dtype, offset=offset).reshape(dims)
    return arr.astype(dtype.newbyteorder("="))


def write_tensor(path: str | pathlib.Path, array: np.ndarray) -> None:
    pathlib.Path(path).write_bytes(encode_tensor(array))


def read_tensor(path: str | pathlib.Path) -> np.ndarray:
    p = pathlib.Path(path)
    return decode_tensor(p.read_bytes(), name=str(p))

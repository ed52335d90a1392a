# storage/ppm.py
from __future__ import annotations
import pathlib

import numpy as np

from .tensorfile import TensorFormatError


def to_uint8(image: np.ndarray) -> np.ndarray:
    """[0,1] 実数画像 → 8bit（四捨五入、範囲外はクリップ）"""
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path: str | pathlib.Path, image: np.ndarray) -> None:
    """(H,W,3) の [0,1] 画像、または uint8 画像を P6 で書き出す"""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H,W,3) image, got {img.shape}")
    if img.dtype != np.uint8:
        img = to_uint8(img)
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(img).tobytes())


def read_ppm(path: str | pathlib.Path) -> np.ndarray:
    """P6 / maxval 255 のみ対応。uint8 (H,W,3) を返す。"""
    data = pathlib.Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TensorFormatError(f"{path}: truncated PPM header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P6" or tokens[3] != b"255":
        raise TensorFormatError(f"{path}: only P6/255 is supported")
    w, h = int(tokens[1]), int(tokens[2])
    payload = data[pos:]
    if len(payload) != w * h * 3:
        raise TensorFormatError(f"{path}: payload size mismatch")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()

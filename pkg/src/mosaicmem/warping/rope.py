# warping/rope.py
"""
3D RoPE（t, u, v）。小数座標のまま連続に位相を評価する。

pair m の回転は次元 (2m, 2m+1) に作用する。pair は t 軸 → u 軸 → v 軸の順に並び、
軸 a の k 番目の pair の角周波数は θ_base^(-2k/d_a)、d_a = 2·dims_a。
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np


class RopeCoord(NamedTuple):
    j: float
    u: float
    v: float


@dataclass(frozen=True)
class RopePhaseTable:
    head_dim: int
    theta_base: float = 10000.0
    dims: Optional[Tuple[int, int, int]] = None   # (dims_t, dims_u, dims_v) の pair 数
    oversample: Optional[int] = None              # 量子化モード（例: 8）。None は連続

    def __post_init__(self):
        if self.head_dim <= 0 or self.head_dim % 2:
            raise ValueError(f"head_dim must be positive and even: {self.head_dim}")
        pairs = self.head_dim // 2
        if self.dims is None:
            # t:u:v ≒ 1:2:2
            du = (2 * pairs) // 5
            object.__setattr__(self, "dims", (pairs - 2 * du, du, du))
        dims = tuple(int(x) for x in self.dims)
        if len(dims) != 3 or min(dims) < 0 or sum(dims) != pairs:
            raise ValueError(f"axis split {dims} must sum to head_dim/2={pairs}")
        object.__setattr__(self, "dims", dims)
        if not self.theta_base > 1:
            raise ValueError(f"theta_base must be > 1: {self.theta_base}")
        if self.oversample is not None and self.oversample < 1:
            raise ValueError(f"oversample must be >= 1: {self.oversample}")

    @property
    def pairs(self) -> int:
        return self.head_dim // 2

    def axis_of_pair(self) -> np.ndarray:
        return np.repeat(np.arange(3), self.dims)

    def frequencies(self) -> np.ndarray:
        freqs = []
        for n in self.dims:
            if n:
                m = np.arange(n, dtype=np.float64)
                freqs.append(self.theta_base ** (-2.0 * m / (2 * n)))
        return np.concatenate(freqs) if freqs else np.zeros(0)

    def quantize(self, coords: np.ndarray) -> np.ndarray:
        if self.oversample is None:
            return coords
        return np.round(coords * self.oversample) / self.oversample


def rope_phases(coord, table: RopePhaseTable) -> np.ndarray:
    """
    coord: (...,3) = (j, u, v)。RopeCoord でも配列でもよい。
    Returns: (..., d/2) 回転角
    """
    c = table.quantize(np.asarray(coord, dtype=np.float64))
    if c.shape[-1] != 3:
        raise ValueError(f"coordinate must have 3 components, got {c.shape}")
    return c[..., table.axis_of_pair()] * table.frequencies()


def apply_rope(vector: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """隣接 pair (2m, 2m+1) を angles[m] だけ回転する"""
    x = np.asarray(vector, dtype=np.float64)
    a = np.asarray(angles, dtype=np.float64)
    if x.shape[-1] % 2 or x.shape[-1] // 2 != a.shape[-1]:
        raise ValueError(f"vector dim {x.shape[-1]} does not match {a.shape[-1]} angles")
    cos, sin = np.cos(a), np.sin(a)
    x0, x1 = x[..., 0::2], x[..., 1::2]
    out = np.empty(np.broadcast_shapes(x.shape, a.shape[:-1] + (x.shape[-1],)))
    out[..., 0::2] = x0 * cos - x1 * sin
    out[..., 1::2] = x0 * sin + x1 * cos
    return out

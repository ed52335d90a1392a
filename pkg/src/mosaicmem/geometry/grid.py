# geometry/grid.py
from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from mosaicmem.model.models import Intrinsics


@dataclass(frozen=True)
class LatentGrid:
    """
    画素グリッドと latent グリッドの対応。

    - 画素 i の中心は座標 i
    - latent トークン (r, c) は画素ブロック [c·ds, (c+1)·ds) × [r·ds, (r+1)·ds) を代表し、
      中心画素は (c·ds + (ds-1)/2, r·ds + (ds-1)/2)
    - 原フレーム f は latent フレーム ⌊f/s⌋ に属する
    """
    downsample: int = 8
    temporal: int = 4

    def __post_init__(self):
        if self.downsample < 1 or self.temporal < 1:
            raise ValueError(f"downsample/temporal must be >= 1: {self.downsample}, {self.temporal}")

    @property
    def offset(self) -> float:
        return (self.downsample - 1) / 2.0

    def token_center(self, rows, cols) -> np.ndarray:
        """(rows, cols) → 中心画素 (...,2) = (u, v)"""
        r = np.asarray(rows, dtype=np.float64)
        c = np.asarray(cols, dtype=np.float64)
        r, c = np.broadcast_arrays(r, c)
        return np.stack([c * self.downsample + self.offset, r * self.downsample + self.offset], axis=-1)

    def pixel_to_latent(self, uv) -> np.ndarray:
        """画素座標 → latent 座標（小数部は保持）"""
        return (np.asarray(uv, dtype=np.float64) - self.offset) / self.downsample

    def latent_to_pixel(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=np.float64) * self.downsample + self.offset

    def nearest_cell(self, uv) -> np.ndarray:
        """画素座標を含む latent セル（= 最近傍トークン）の整数 index"""
        return np.floor((np.asarray(uv, dtype=np.float64) + 0.5) / self.downsample).astype(np.int64)

    def latent_shape(self, intrinsics: Intrinsics) -> tuple[int, int]:
        if intrinsics.width % self.downsample or intrinsics.height % self.downsample:
            raise ValueError(
                f"image {intrinsics.width}x{intrinsics.height} not divisible by downsample {self.downsample}")
        return intrinsics.height // self.downsample, intrinsics.width // self.downsample

    def latent_frame(self, frame_index: int) -> int:
        return int(frame_index) // self.temporal

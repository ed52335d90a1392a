# memory/patch.py
from __future__ import annotations
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.camera import back_project_pixels
from mosaicmem.geometry.grid import LatentGrid


@dataclass(frozen=True, eq=False)
class MemoryPatch:
    """
    Mosaic Memory の単位。p×p の latent トークンと per-token depth を持ち、
    world_points は source_camera からの lift 結果（省略時は自動計算）。

    rope_origin = (t, row, col): 左上トークンの latent グリッド座標
    """
    id: int
    latent: np.ndarray
    depth: np.ndarray
    source_camera: Camera
    source_time: int
    rope_origin: Tuple[int, int, int]
    downsample: int = 8
    world_points: Optional[np.ndarray] = None

    def __post_init__(self):
        latent = np.array(self.latent, dtype=np.float32)
        depth = np.array(self.depth, dtype=np.float64)
        if latent.ndim != 3 or latent.shape[0] != latent.shape[1] or latent.shape[0] < 1 or latent.shape[2] < 1:
            raise ValueError(f"latent must be (p,p,c) with p,c >= 1, got {latent.shape}")
        if depth.shape != latent.shape[:2]:
            raise ValueError(f"depth shape {depth.shape} does not match latent {latent.shape}")
        if not np.all(depth > 0) or not np.all(np.isfinite(depth)):
            raise ValueError(f"patch {self.id}: depth must be positive and finite")
        origin = tuple(int(x) for x in self.rope_origin)
        if len(origin) != 3:
            raise ValueError(f"rope_origin must be (t,row,col): {self.rope_origin}")
        latent.flags.writeable = False
        depth.flags.writeable = False
        object.__setattr__(self, "latent", latent)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "rope_origin", origin)
        object.__setattr__(self, "source_time", int(self.source_time))
        if self.world_points is None:
            pts = back_project_pixels(self.source_camera, self.token_pixels(), depth)
        else:
            pts = np.array(self.world_points, dtype=np.float64)
            if pts.shape != depth.shape + (3,):
                raise ValueError(f"world_points shape {pts.shape} != {depth.shape + (3,)}")
        pts.flags.writeable = False
        object.__setattr__(self, "world_points", pts)

    @property
    def size(self) -> int:
        return self.latent.shape[0]

    @property
    def channels(self) -> int:
        return self.latent.shape[2]

    @property
    def grid(self) -> LatentGrid:
        return LatentGrid(downsample=self.downsample)

    def token_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        """各トークンの latent グリッド (row, col)、それぞれ (p,p)"""
        p = self.size
        rr, cc = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
        return rr + self.rope_origin[1], cc + self.rope_origin[2]

    def token_pixels(self) -> np.ndarray:
        """トークン中心の画素座標 (p,p,2)"""
        rows, cols = self.token_indices()
        return self.grid.token_center(rows, cols)

    def grid_position(self) -> Tuple[int, int]:
        """source フレーム内のパッチグリッド位置 (row, col)"""
        return self.rope_origin[1] // self.size, self.rope_origin[2] // self.size

    def centroid(self) -> np.ndarray:
        return self.world_points.reshape(-1, 3).mean(axis=0)

    def with_id(self, new_id: int) -> "MemoryPatch":
        return replace(self, id=int(new_id))


def lift_frame(latent_frame: np.ndarray, depth_map: np.ndarray, camera: Camera, time: int,
               patch_size: int, downsample: int = 8, first_id: int = 0,
               skip_nonfinite: bool = True) -> List[MemoryPatch]:
    """
    latent フレーム (H,W,c) と latent 解像度の depth (H,W) をパッチに分割して 3D に持ち上げる。

    depth が +inf（背景）のトークンを含むパッチは skip_nonfinite=True のとき捨てる。
    0 以下 / NaN の depth は ValueError。
    """
    lat = np.asarray(latent_frame)
    dep = np.asarray(depth_map, dtype=np.float64)
    if lat.ndim != 3:
        raise ValueError(f"latent frame must be (H,W,c), got {lat.shape}")
    h, w, _ = lat.shape
    if dep.shape != (h, w):
        raise ValueError(f"depth map {dep.shape} does not match latent {lat.shape[:2]}")
    p = int(patch_size)
    if p < 1 or h % p or w % p:
        raise ValueError(f"latent {h}x{w} not divisible by patch size {p}")
    if np.any(np.isnan(dep)) or np.any(dep <= 0):
        raise ValueError("depth must be positive")
    if not skip_nonfinite and not np.all(np.isfinite(dep)):
        raise ValueError("depth must be finite")

    patches: List[MemoryPatch] = []
    next_id = int(first_id)
    for r0 in range(0, h, p):
        for c0 in range(0, w, p):
            d = dep[r0:r0 + p, c0:c0 + p]
            if not np.all(np.isfinite(d)):
                continue
            patches.append(MemoryPatch(
                id=next_id,
                latent=lat[r0:r0 + p, c0:c0 + p],
                depth=d,
                source_camera=camera,
                source_time=time,
                rope_origin=(time, r0, c0),
                downsample=downsample,
            ))
            next_id += 1
    return patches

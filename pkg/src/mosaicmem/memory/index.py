# memory/index.py
"""
一様ボクセルグリッドによる空間インデックス。

セル key = floor(x / voxel_size)。セル → patch id の集合を保持し、
視錐台カリングはセルの 8 頂点がすべて同じ平面の外側にあるときだけ落とす（保守的）。
"""
from __future__ import annotations
from collections import defaultdict
from typing import Dict, Iterable, Set, Tuple

import numpy as np
from scipy.spatial import cKDTree

from mosaicmem.model.models import Camera

Key = Tuple[int, int, int]

_CORNERS = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.float64)


def estimate_voxel_size(points: np.ndarray, fallback: float = 1.0) -> float:
    """最近傍距離の中央値。点が 2 個未満や距離 0 のときは fallback。"""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        return fallback
    dist, _ = cKDTree(pts).query(pts, k=2)
    spacing = float(np.median(dist[:, 1]))
    if not np.isfinite(spacing) or spacing <= 0:
        return fallback
    return spacing


class VoxelIndex:
    def __init__(self, voxel_size: float):
        if not voxel_size > 0:
            raise ValueError(f"voxel_size must be positive: {voxel_size}")
        self.voxel_size = float(voxel_size)
        self.cells: Dict[Key, Set[int]] = defaultdict(set)
        self._keys_of: Dict[int, Set[Key]] = {}

    # --- 更新 ----------------------------------------------------------------

    def keys_for(self, points: np.ndarray) -> Set[Key]:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        keys = np.floor(pts / self.voxel_size).astype(np.int64)
        return {tuple(k) for k in np.unique(keys, axis=0).tolist()}

    def add(self, patch_id: int, points: np.ndarray) -> None:
        if patch_id in self._keys_of:
            raise KeyError(f"patch {patch_id} already indexed")
        keys = self.keys_for(points)
        for k in keys:
            self.cells[k].add(patch_id)
        self._keys_of[patch_id] = keys

    def remove(self, patch_id: int) -> None:
        for k in self._keys_of.pop(patch_id, ()):
            ids = self.cells[k]
            ids.discard(patch_id)
            if not ids:
                del self.cells[k]

    def __contains__(self, patch_id: int) -> bool:
        return patch_id in self._keys_of

    def keys_of(self, patch_id: int) -> Set[Key]:
        return set(self._keys_of.get(patch_id, ()))

    # --- 検索 ----------------------------------------------------------------

    def visible_cells(self, camera: Camera, margin_px: float = 1.0) -> list[Key]:
        """視錐台と交差しうるセル（保守的）"""
        if not self.cells:
            return []
        keys = np.array(list(self.cells.keys()), dtype=np.float64)
        corners = (keys[:, None, :] + _CORNERS[None, :, :]) * self.voxel_size
        xc = corners @ camera.pose.rotation.T + camera.pose.translation
        x, y, z = xc[..., 0], xc[..., 1], xc[..., 2]
        k = camera.intrinsics
        m = float(margin_px)
        # 半空間 f >= 0 の内側が視錐台（z>0 の錐）。全頂点が外なら除外。
        planes = (
            z,
            k.fx * x + (k.cx + m) * z,
            (k.width + m - k.cx) * z - k.fx * x,
            k.fy * y + (k.cy + m) * z,
            (k.height + m - k.cy) * z - k.fy * y,
        )
        eps = 1e-9 * self.voxel_size
        outside = np.zeros(len(keys), dtype=bool)
        for f in planes:
            outside |= np.all(f < -eps, axis=1)
        # z 平面: セル全体が z<=0 なら不可視
        outside |= np.all(z <= 0, axis=1)
        return [tuple(int(v) for v in key) for key in keys[~outside]]

    def candidates(self, camera: Camera) -> Set[int]:
        found: Set[int] = set()
        for key in self.visible_cells(camera):
            found.update(self.cells[key])
        return found

    def rebuild(self, items: Iterable[Tuple[int, np.ndarray]]) -> "VoxelIndex":
        self.cells.clear()
        self._keys_of.clear()
        for pid, pts in items:
            self.add(pid, pts)
        return self

# memory/store.py
from __future__ import annotations
import threading
from typing import Dict, Iterable, Iterator, List, Optional

import numpy as np

from .patch import MemoryPatch, lift_frame
from .index import VoxelIndex, estimate_voxel_size


class MosaicMemory:
    """
    パッチ集合 + ボクセルインデックス。

    single-writer / multi-reader: 書き込み（insert/remove）は RLock で直列化し、
    読み出しは snapshot() でその時点のパッチ一覧を取る。
    """

    def __init__(self, voxel_size: Optional[float] = None):
        self._lock = threading.RLock()
        self._patches: Dict[int, MemoryPatch] = {}
        self._index: Optional[VoxelIndex] = VoxelIndex(voxel_size) if voxel_size else None
        self.next_id = 0

    # --- 参照 ----------------------------------------------------------------

    @property
    def voxel_size(self) -> Optional[float]:
        return self._index.voxel_size if self._index else None

    @property
    def index(self) -> Optional[VoxelIndex]:
        return self._index

    def __len__(self) -> int:
        return len(self._patches)

    def __contains__(self, patch_id: int) -> bool:
        return patch_id in self._patches

    def __iter__(self) -> Iterator[MemoryPatch]:
        return iter(self.snapshot())

    def get(self, patch_id: int) -> MemoryPatch:
        return self._patches[patch_id]

    def ids(self) -> List[int]:
        with self._lock:
            return sorted(self._patches)

    def candidates(self, camera) -> List[int]:
        """ボクセルインデックスから視錐台候補の id（昇順）"""
        with self._lock:
            if self._index is None:
                return []
            return sorted(self._index.candidates(camera))

    def snapshot(self) -> List[MemoryPatch]:
        """id 昇順のパッチ一覧"""
        with self._lock:
            return [self._patches[i] for i in sorted(self._patches)]

    # --- 更新 ----------------------------------------------------------------

    def allocate_ids(self, n: int) -> List[int]:
        with self._lock:
            ids = list(range(self.next_id, self.next_id + n))
            self.next_id += n
            return ids

    def insert(self, patches: Iterable[MemoryPatch]) -> "MosaicMemory":
        patches = list(patches)
        with self._lock:
            seen = set()
            for p in patches:
                if p.id in self._patches or p.id in seen:
                    raise KeyError(f"duplicate patch id {p.id}")
                seen.add(p.id)
            if not patches:
                return self
            if self._index is None:
                pts = np.concatenate([p.world_points.reshape(-1, 3) for p in patches])
                self._index = VoxelIndex(estimate_voxel_size(pts))
            for p in patches:
                self._patches[p.id] = p
                self._index.add(p.id, p.world_points)
            self.next_id = max(self.next_id, max(seen) + 1)
        return self

    def remove(self, ids: Iterable[int]) -> "MosaicMemory":
        with self._lock:
            for pid in ids:
                if self._patches.pop(pid, None) is not None:
                    self._index.remove(pid)
        return self

    def lift_and_insert(self, latent_frame, depth_map, camera, time: int, patch_size: int,
                        downsample: int = 8) -> List[MemoryPatch]:
        """lift_frame して新しい id で挿入する"""
        with self._lock:
            patches = lift_frame(latent_frame, depth_map, camera, time, patch_size,
                                 downsample=downsample, first_id=self.next_id)
            self.insert(patches)
            return patches

    def copy(self) -> "MosaicMemory":
        with self._lock:
            other = MosaicMemory(self.voxel_size)
            other.insert(self.snapshot())
            other.next_id = self.next_id
            return other

    # --- デバッグ ------------------------------------------------------------

    def inspect(self) -> dict:
        with self._lock:
            times = sorted({p.source_time for p in self._patches.values()})
            return {
                "patches": len(self._patches),
                "next_id": self.next_id,
                "voxel_size": self.voxel_size,
                "cells": len(self._index.cells) if self._index else 0,
                "source_times": times,
            }

    def same_contents(self, other: "MosaicMemory") -> bool:
        """id・latent・world_points が一致するか（テスト・検証用）"""
        a, b = self.snapshot(), other.snapshot()
        if [p.id for p in a] != [p.id for p in b]:
            return False
        return all(np.array_equal(x.latent, y.latent) and np.allclose(x.world_points, y.world_points)
                   for x, y in zip(a, b))

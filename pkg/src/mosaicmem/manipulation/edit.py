# manipulation/edit.py
"""
メモリ空間の直接編集。すべて新しい MosaicMemory を返し、入力は変更しない。

変換 x' = s·R·x + t の下で、コピーのカメラは RigidTransform.apply_camera で合わせ、
depth は s 倍、world_points は新カメラから持ち上げ直す（lift 整合性を保つ）。
"""
from __future__ import annotations
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from mosaicmem.model.models import Camera, RigidTransform
from mosaicmem.geometry.camera import project_points
from mosaicmem.memory.patch import MemoryPatch
from mosaicmem.memory.store import MosaicMemory


@dataclass(frozen=True, eq=False)
class Selection:
    """id リスト / world 空間の AABB / ある視点での画像領域 のいずれか"""
    ids: Optional[Tuple[int, ...]] = None
    box: Optional[Tuple[Tuple[float, float, float], Tuple[float, float, float]]] = None
    camera: Optional[Camera] = None
    region: Optional[np.ndarray] = None
    everything: bool = False

    def __post_init__(self):
        given = sum(x is not None for x in (self.ids, self.box, self.region)) + int(self.everything)
        if given != 1:
            raise ValueError("selection needs exactly one of ids, box, region or all")
        if self.region is not None and self.camera is None:
            raise ValueError("an image-space region needs a camera")

    @classmethod
    def by_ids(cls, ids: Sequence[int]) -> "Selection":
        return cls(ids=tuple(int(i) for i in ids))

    @classmethod
    def in_box(cls, lo: Sequence[float], hi: Sequence[float]) -> "Selection":
        return cls(box=(tuple(map(float, lo)), tuple(map(float, hi))))

    @classmethod
    def in_region(cls, camera: Camera, mask: np.ndarray) -> "Selection":
        return cls(camera=camera, region=np.asarray(mask, dtype=bool))

    @classmethod
    def all(cls) -> "Selection":
        return cls(everything=True)

    def resolve(self, memory: MosaicMemory) -> List[int]:
        """固定のストアに対して決定的な id 集合（昇順）。判定はパッチ重心で行う。"""
        patches = memory.snapshot()
        if self.everything:
            return [p.id for p in patches]
        if self.ids is not None:
            missing = [i for i in self.ids if i not in memory]
            if missing:
                warnings.warn(f"selection refers to unknown patch ids: {missing}")
            return sorted({i for i in self.ids if i in memory})
        if not patches:
            return []
        centroids = np.array([p.centroid() for p in patches])
        if self.box is not None:
            lo, hi = np.asarray(self.box[0]), np.asarray(self.box[1])
            hit = np.all((centroids >= lo) & (centroids <= hi), axis=1)
        else:
            uv, _, valid = project_points(self.camera, centroids)
            h, w = self.region.shape
            col = np.clip(np.rint(np.nan_to_num(uv[:, 0])), 0, w - 1).astype(np.int64)
            row = np.clip(np.rint(np.nan_to_num(uv[:, 1])), 0, h - 1).astype(np.int64)
            hit = valid & self.region[row, col]
        return [p.id for p, h_ in zip(patches, hit) if h_]


def transform_patch(patch: MemoryPatch, xf: RigidTransform, new_id: int) -> MemoryPatch:
    return MemoryPatch(
        id=new_id,
        latent=patch.latent,
        depth=patch.depth * xf.scale,
        source_camera=xf.apply_camera(patch.source_camera),
        source_time=patch.source_time,
        rope_origin=patch.rope_origin,
        downsample=patch.downsample,
    )


# --- 公開API -----------------------------------------------------------------

def delete(memory: MosaicMemory, sel: Selection) -> MosaicMemory:
    out = memory.copy()
    return out.remove(sel.resolve(memory))


def duplicate(memory: MosaicMemory, sel: Selection, xf: RigidTransform) -> MosaicMemory:
    ids = sel.resolve(memory)
    out = memory.copy()
    new_ids = out.allocate_ids(len(ids))
    return out.insert([transform_patch(memory.get(i), xf, n) for i, n in zip(ids, new_ids)])


def relocate(memory: MosaicMemory, sel: Selection, xf: RigidTransform) -> MosaicMemory:
    ids = sel.resolve(memory)
    moved = duplicate(memory, Selection.by_ids(ids), xf)
    return moved.remove(ids)


def stitch(mem_a: MosaicMemory, mem_b: MosaicMemory, xf: RigidTransform) -> MosaicMemory:
    """A ∪ xf(B)。B のパッチには A の next_id 以降の新しい id を振る。"""
    out = mem_a.copy()
    b_patches = mem_b.snapshot()
    new_ids = out.allocate_ids(len(b_patches))
    return out.insert([transform_patch(p, xf, n) for p, n in zip(b_patches, new_ids)])


def copy_ids(memory: MosaicMemory, before: MosaicMemory) -> List[int]:
    """before に無かった id（duplicate/stitch で増えた分）"""
    return [i for i in memory.ids() if i not in before]

# memory/retrieval.py
from __future__ import annotations
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.grid import LatentGrid
from mosaicmem.geometry.camera import project_points
from mosaicmem.warping.warp import TokenWarp, warp_rope_coords
from mosaicmem.warping.latent import AlignedLatent, align_to_query, build_source_plane
from .patch import MemoryPatch
from .store import MosaicMemory

MODES = ("dense", "sparse")

@dataclass(frozen=True)
class RetrievalConfig:
    mode: str = "dense"
    stride: int = 1
    occlusion_threshold: float = 0.25
    depth_tolerance: float = 0.01        # z-buffer 許容（近い側の深度に対する比）
    max_patches: Optional[int] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}: {self.mode}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1: {self.stride}")
        if not 0.0 <= self.occlusion_threshold <= 1.0:
            raise ValueError(f"occlusion_threshold must be in [0,1]: {self.occlusion_threshold}")
        if self.depth_tolerance < 0:
            raise ValueError(f"depth_tolerance must be >= 0: {self.depth_tolerance}")
        if self.max_patches is not None and self.max_patches < 0:
            raise ValueError(f"max_patches must be >= 0: {self.max_patches}")

@dataclass(frozen=True, eq=False)
class RetrievedPatch:
    patch_id: int
    warped_coords: np.ndarray    # (p,p,3) = (j, u', v')
    valid: np.ndarray            # (p,p)
    occlusion_score: float
    query_depth: np.ndarray      # (p,p)
    query_pixels: np.ndarray     # (p,p,2)

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

# --- 候補 -------------------------------------------------------------------

def candidate_patches(memory: MosaicMemory, query_camera: Camera) -> List[int]:
    """インデックスによる候補（視錐台内トークンを持つパッチの上位集合）"""
    return memory.candidates(query_camera)

def first_frame_footprint(memory: MosaicMemory, query_camera: Camera, first_time: int = 0,
                          downsample: int = 8) -> np.ndarray:
    """
    source_time == first_time のパッチを query に投影し、当たった latent セルを
    画素解像度に展開した (H,W) マスクを返す。
    """
    k = query_camera.intrinsics
    grid = LatentGrid(downsample=downsample)
    qh, qw = grid.latent_shape(k)
    cells = np.zeros((qh, qw), dtype=bool)
    for p in memory.snapshot():
        if p.source_time != first_time:
            continue
        uv, _, valid = project_points(query_camera, p.world_points)
        cell = grid.nearest_cell(uv[valid])
        cells[np.clip(cell[:, 1], 0, qh - 1), np.clip(cell[:, 0], 0, qw - 1)] = True
    return np.kron(cells, np.ones((downsample, downsample), dtype=bool))

# --- 検索本体 ----------------------------------------------------------------

def retrieve(memory: MosaicMemory, query_camera: Camera, query_time: int,
             config: Optional[RetrievalConfig] = None, skip_region: Optional[np.ndarray] = None,
             use_index: bool = True) -> List[RetrievedPatch]:
    """
    1. 候補パッチの全トークンを query に再投影（視錐台外は無効）
    2. query latent 解像度の z-buffer（id 昇順で全候補にわたって実施）
    3. occlusion_score = 生存トークン / p²、閾値未満は除外
    4. sparse: source グリッド上で stride 間引き
    5. skip_region（画素マスク）内のトークンを無効化、有効 0 のパッチは除外
    6. score 降順・id 昇順で並べ max_patches で打ち切り
    """
    cfg = config or RetrievalConfig()
    if use_index:
        ids = candidate_patches(memory, query_camera)
        patches = [memory.get(i) for i in ids]
    else:
        patches = memory.snapshot()
    if not patches:
        return []

    k = query_camera.intrinsics
    warps = [warp_rope_coords(p, query_camera, query_time) for p in patches]

    # --- z-buffer ---
    zbuf = {}
    cells_of = []
    for p, w in zip(patches, warps):
        grid = LatentGrid(downsample=p.downsample)
        qh, qw = grid.latent_shape(k)
        cell = grid.nearest_cell(np.nan_to_num(w.pixels, nan=-1.0, posinf=-1.0, neginf=-1.0))
        flat = np.clip(cell[..., 1], 0, qh - 1) * qw + np.clip(cell[..., 0], 0, qw - 1)
        cells_of.append(flat)
        buf = zbuf.setdefault(p.downsample, np.full(qh * qw, np.inf))
        np.minimum.at(buf, flat[w.valid], w.depth[w.valid])

    results: List[RetrievedPatch] = []
    for p, w, flat in zip(patches, warps, cells_of):
        nearest = zbuf[p.downsample][flat]
        survive = w.valid & (w.depth <= nearest * (1.0 + cfg.depth_tolerance))
        score = float(survive.sum()) / float(p.size * p.size)
        if score <= 0.0 or score < cfg.occlusion_threshold:
            continue
        if cfg.mode == "sparse":
            gr, gc = p.grid_position()
            if gr % cfg.stride or gc % cfg.stride:
                continue
        if skip_region is not None:
            survive = survive & ~_in_region(skip_region, w.pixels)
            if not survive.any():
                continue
        results.append(RetrievedPatch(
            patch_id=p.id,
            warped_coords=w.coords,
            valid=survive,
            occlusion_score=score,
            query_depth=w.depth,
            query_pixels=w.pixels,
        ))

    results.sort(key=lambda r: (-r.occlusion_score, r.patch_id))
    if cfg.max_patches is not None:
        results = results[:cfg.max_patches]
    return results

def _in_region(region: np.ndarray, uv: np.ndarray) -> np.ndarray:
    mask = np.asarray(region, dtype=bool)
    h, w = mask.shape
    with np.errstate(invalid="ignore"):
        col = np.clip(np.rint(np.nan_to_num(uv[..., 0])), 0, w - 1).astype(np.int64)
        row = np.clip(np.rint(np.nan_to_num(uv[..., 1])), 0, h - 1).astype(np.int64)
    return mask[row, col]

def warp_retrieved_latents(memory: MosaicMemory, retrieved: List[RetrievedPatch],
                           query_camera: Camera) -> Dict[int, AlignedLatent]:
    """
    検索結果ごとに query セルへ揃えた warped latent を作る。
    source 平面は (source_time, source カメラ) が同じパッチから再構成する。
    """
    planes: Dict[tuple, tuple] = {}
    out: Dict[int, AlignedLatent] = {}
    for r in retrieved:
        patch = memory.get(r.patch_id)
        key = _frame_key(patch)
        if key not in planes:
            siblings = [p for p in memory.snapshot() if _frame_key(p) == key]
            shape = LatentGrid(downsample=patch.downsample).latent_shape(patch.source_camera.intrinsics)
            planes[key] = build_source_plane(siblings, shape)
        plane, coverage = planes[key]
        warp = TokenWarp(coords=r.warped_coords, pixels=r.query_pixels, depth=r.query_depth, valid=r.valid)
        out[r.patch_id] = align_to_query(patch, warp, r.valid, plane, coverage, query_camera)
    return out

def _frame_key(patch: MemoryPatch) -> tuple:
    cam = patch.source_camera
    return (patch.source_time, patch.downsample, cam.intrinsics,
            cam.pose.rotation.tobytes(), cam.pose.translation.tobytes())

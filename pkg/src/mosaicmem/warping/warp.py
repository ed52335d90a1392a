# warping/warp.py
from __future__ import annotations
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Sequence

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.camera import project_points
from mosaicmem.geometry.grid import LatentGrid

if TYPE_CHECKING:
    from mosaicmem.memory.patch import MemoryPatch


@dataclass(frozen=True, eq=False)
class TokenWarp:
    """1 パッチ分の再投影結果"""
    coords: np.ndarray   # (p,p,3) = (j, u', v')  latent 単位
    pixels: np.ndarray   # (p,p,2) query 画素座標（小数）
    depth: np.ndarray    # (p,p) query カメラでの z
    valid: np.ndarray    # (p,p) z>0 かつ画像内


def warp_rope_coords(patch: "MemoryPatch", query_camera: Camera, query_time: int) -> TokenWarp:
    """world_points を query に投影し、latent 単位の (j, u', v') に変換（小数部保持）"""
    uv, z, valid = project_points(query_camera, patch.world_points)
    lat = LatentGrid(downsample=patch.downsample).pixel_to_latent(uv)
    j = np.full(z.shape, float(query_time))
    coords = np.concatenate([j[..., None], lat], axis=-1)
    return TokenWarp(coords=coords, pixels=uv, depth=z, valid=valid)


# --- 混合戦略 ----------------------------------------------------------------

ALIGNMENTS = ("rope", "latent", "both")


def assign_alignment(patch_ids: Sequence[int], mode: str = "mix", ratio: float = 0.5,
                     seed: int = 0) -> Dict[int, str]:
    """
    パッチごとに warped RoPE / warped latent を割り当てる。
    mode="mix" のとき ratio の確率で "rope"、残りを "latent"（seed 固定で決定的）。
    """
    if mode in ALIGNMENTS:
        return {int(pid): mode for pid in patch_ids}
    if mode != "mix":
        raise ValueError(f"unknown alignment mode: {mode}")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0,1]: {ratio}")
    ids = sorted(int(p) for p in patch_ids)
    draws = np.random.default_rng(seed).random(len(ids))
    return {pid: ("rope" if d < ratio else "latent") for pid, d in zip(ids, draws)}


def count_alignments(assignment: Dict[int, str]) -> Dict[str, int]:
    counts: Dict[str, int] = {k: 0 for k in ALIGNMENTS}
    for v in assignment.values():
        counts[v] += 1
    return counts


__all__: List[str] = ["TokenWarp", "warp_rope_coords", "assign_alignment", "count_alignments", "ALIGNMENTS"]

# warping/latent.py
"""
Warped Latent: source フレームの latent 平面をバイリニア補間でサンプリングする。

グリッド座標は (u, v) = (col, row)、latent 単位。
範囲外はクランプせず validity=False・値 0。
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Tuple

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.camera import back_project_pixels, project_points
from mosaicmem.geometry.grid import LatentGrid

if TYPE_CHECKING:
    from mosaicmem.memory.patch import MemoryPatch
    from .warp import TokenWarp

# 格子端の丸め誤差の許容（latent 単位）
EDGE_TOL = 1e-6
JACOBIAN_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class WarpedLatent:
    values: np.ndarray     # (p,p,c)
    validity: np.ndarray   # (p,p)

    def __post_init__(self):
        vals = np.array(self.values)
        ok = np.asarray(self.validity, dtype=bool)
        vals[~ok] = 0
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "validity", ok)


def bilinear_weights(grid: np.ndarray, height: int, width: int):
    """4 近傍の index と重み、および範囲内フラグを返す"""
    g = np.asarray(grid, dtype=np.float64)
    u, v = g[..., 0], g[..., 1]
    with np.errstate(invalid="ignore"):
        valid = (np.isfinite(u) & np.isfinite(v)
                 & (u >= -EDGE_TOL) & (u <= width - 1 + EDGE_TOL)
                 & (v >= -EDGE_TOL) & (v <= height - 1 + EDGE_TOL))
    uc = np.clip(np.where(valid, u, 0.0), 0.0, width - 1)
    vc = np.clip(np.where(valid, v, 0.0), 0.0, height - 1)
    u0 = np.floor(uc).astype(np.int64)
    v0 = np.floor(vc).astype(np.int64)
    fu = uc - u0
    fv = vc - v0
    u1 = np.minimum(u0 + 1, width - 1)
    v1 = np.minimum(v0 + 1, height - 1)
    idx = ((v0, u0), (v0, u1), (v1, u0), (v1, u1))
    w = ((1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv)
    return idx, w, valid


def warp_latent(source_plane: np.ndarray, target_grid: np.ndarray,
                coverage: Optional[np.ndarray] = None) -> WarpedLatent:
    """
    source_plane: (H,W,c)
    target_grid:  (...,2) 小数座標 (u, v)
    coverage:     (H,W) 有効な source トークン。重み > 0 の近傍が欠けていれば無効。
    """
    plane = np.asarray(source_plane)
    if plane.ndim != 3:
        raise ValueError(f"source plane must be (H,W,c), got {plane.shape}")
    h, w, _ = plane.shape
    idx, weights, valid = bilinear_weights(target_grid, h, w)
    acc = np.zeros(valid.shape + (plane.shape[2],), dtype=np.float64)
    for (vi, ui), wt in zip(idx, weights):
        acc += wt[..., None] * plane[vi, ui].astype(np.float64)
        if coverage is not None:
            valid &= ~((wt > 0) & ~np.asarray(coverage, dtype=bool)[vi, ui])
    out_dtype = plane.dtype if np.issubdtype(plane.dtype, np.floating) else np.float32
    return WarpedLatent(acc.astype(out_dtype), valid)


# --- memory パッチ → query セル ----------------------------------------------

def build_source_plane(patches: Iterable["MemoryPatch"], shape: Tuple[int, int]):
    """同じ source フレームのパッチを latent 平面に並べ直す → (plane, coverage)"""
    patches = list(patches)
    h, w = shape
    c = patches[0].channels if patches else 1
    plane = np.zeros((h, w, c), dtype=np.float32)
    coverage = np.zeros((h, w), dtype=bool)
    for p in patches:
        _, r0, c0 = p.rope_origin
        n = p.size
        plane[r0:r0 + n, c0:c0 + n] = p.latent
        coverage[r0:r0 + n, c0:c0 + n] = True
    return plane, coverage


@dataclass(frozen=True, eq=False)
class AlignedLatent:
    """query の latent セルに揃えた warped latent"""
    cells: np.ndarray      # (p,p,2) 整数 (col, row)
    values: np.ndarray     # (p,p,c)
    validity: np.ndarray   # (p,p)
    depth: np.ndarray      # (p,p) query での z


def _warp_jacobian(patch: "MemoryPatch", warp: "TokenWarp", query_camera: Camera) -> np.ndarray:
    """∂(u',v')/∂(col,row) の (p,p,2,2)"""
    coords = warp.coords[..., 1:]
    if patch.size >= 2:
        du_dr, du_dc = np.gradient(coords[..., 0])
        dv_dr, dv_dc = np.gradient(coords[..., 1])
        return np.stack([np.stack([du_dc, du_dr], -1), np.stack([dv_dc, dv_dr], -1)], -2)
    # p=1: 一定深度を仮定した中心差分
    grid = patch.grid
    pix = patch.token_pixels()
    jac = np.zeros(patch.depth.shape + (2, 2))
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = 0.5 * grid.downsample
        ends = []
        for sign in (1.0, -1.0):
            pts = back_project_pixels(patch.source_camera, pix + sign * step, patch.depth)
            uv, _, _ = project_points(query_camera, pts)
            ends.append(grid.pixel_to_latent(uv))
        jac[..., :, axis] = ends[0] - ends[1]
    return jac


def align_to_query(patch: "MemoryPatch", warp: "TokenWarp", valid: np.ndarray,
                   plane: np.ndarray, coverage: np.ndarray, query_camera: Camera) -> AlignedLatent:
    """
    各トークンを最近傍の query セルにスナップし、
    そのセル中心に写る source 位置を局所ヤコビアンの逆で求めてサンプリングする。
    """
    coords = warp.coords[..., 1:]
    qh, qw = LatentGrid(downsample=patch.downsample).latent_shape(query_camera.intrinsics)
    with np.errstate(invalid="ignore"):
        cells = np.rint(np.nan_to_num(coords, nan=-1.0, posinf=-1.0, neginf=-1.0)).astype(np.int64)
    inside = (cells[..., 0] >= 0) & (cells[..., 0] < qw) & (cells[..., 1] >= 0) & (cells[..., 1] < qh)

    jac = _warp_jacobian(patch, warp, query_camera)
    det = np.linalg.det(jac)
    ok = np.abs(det) > JACOBIAN_EPS
    safe = np.where(ok[..., None, None], jac, np.eye(2))
    delta = np.linalg.solve(safe, (cells - coords)[..., None])[..., 0]

    rows, cols = patch.token_indices()
    src = np.stack([cols, rows], axis=-1).astype(np.float64) + delta
    sampled = warp_latent(plane, src, coverage)
    validity = np.asarray(valid, dtype=bool) & inside & ok & sampled.validity
    values = np.where(validity[..., None], sampled.values, 0).astype(sampled.values.dtype)
    return AlignedLatent(cells=cells, values=values, validity=validity, depth=warp.depth)

# simulator/render.py
"""
z-buffer つき点スプラット。各点は投影半径 (r·fx/z, r·fy/z) の楕円を塗り、
画素ごとに最も近い深度が勝つ（同深度は点 index の小さい方）。
半径は splat_cap で頭打ちになる。
"""
from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.camera import to_camera_frame
from .scene import SyntheticScene

NEAR = 1e-6
MAX_SPLAT_PX = 64


def splat_cap(width: int, height: int) -> int:
    """
    スプラット半径の上限 [px]。max(MAX_SPLAT_PX, 長辺/4)。
    これを超える近接点の楕円は中心 ±cap の正方形に切り詰められる。
    """
    return max(MAX_SPLAT_PX, (max(width, height) + 3) // 4)


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    image: np.ndarray       # (H,W,3) [0,1]、背景は 0
    depth: np.ndarray       # (H,W)、背景は +inf
    point_ids: np.ndarray   # (H,W)、背景は -1
    camera: Camera

    @property
    def covered(self) -> np.ndarray:
        return self.point_ids >= 0


def render(scene: SyntheticScene, camera: Camera, time: float = 0.0) -> RenderedFrame:
    k = camera.intrinsics
    h, w = k.height, k.width
    image = np.zeros((h, w, 3), dtype=np.float64)
    depth = np.full((h, w), np.inf)
    ids = np.full((h, w), -1, dtype=np.int64)
    if len(scene) == 0:
        return RenderedFrame(image, depth, ids, camera)

    xc = to_camera_frame(camera, scene.positions_at(time))
    z = xc[:, 2]
    front = np.nonzero(z > NEAR)[0]
    if len(front) == 0:
        return RenderedFrame(image, depth, ids, camera)
    zf = z[front]
    u = k.fx * xc[front, 0] / zf + k.cx
    v = k.fy * xc[front, 1] / zf + k.cy
    rx = scene.radii[front] * k.fx / zf
    ry = scene.radii[front] * k.fy / zf
    reach = np.minimum(np.ceil(np.maximum(rx, ry)).astype(np.int64), splat_cap(w, h))

    # 粗い画面外判定
    onscreen = (u + reach >= 0) & (u - reach < w) & (v + reach >= 0) & (v - reach < h)

    pix_all, dep_all, idx_all = [], [], []
    for radius in np.unique(reach[onscreen]):
        sel = np.nonzero(onscreen & (reach == radius))[0]
        off = np.arange(-radius, radius + 1)
        dx, dy = np.meshgrid(off, off, indexing="xy")
        px = np.rint(u[sel])[:, None].astype(np.int64) + dx.reshape(1, -1)
        py = np.rint(v[sel])[:, None].astype(np.int64) + dy.reshape(1, -1)
        inside = (((px - u[sel, None]) / rx[sel, None]) ** 2
                  + ((py - v[sel, None]) / ry[sel, None]) ** 2) <= 1.0
        inside &= (px >= 0) & (px < w) & (py >= 0) & (py < h)
        rows, cols = np.nonzero(inside)
        pix_all.append(py[rows, cols] * w + px[rows, cols])
        dep_all.append(zf[sel][rows])
        idx_all.append(front[sel][rows])

    pix = np.concatenate(pix_all) if pix_all else np.zeros(0, dtype=np.int64)
    if len(pix) == 0:
        return RenderedFrame(image, depth, ids, camera)
    dep = np.concatenate(dep_all)
    idx = np.concatenate(idx_all)

    order = np.lexsort((idx, dep, pix))
    pix, dep, idx = pix[order], dep[order], idx[order]
    first = np.unique(pix, return_index=True)[1]
    pix, dep, idx = pix[first], dep[first], idx[first]

    flat_img = image.reshape(-1, 3)
    flat_img[pix] = scene.colors[idx]
    depth.reshape(-1)[pix] = dep
    ids.reshape(-1)[pix] = idx
    return RenderedFrame(image, depth, ids, camera)


def pool_latent(image: np.ndarray, depth: np.ndarray, downsample: int):
    """
    疑似 latent: 画像の平均プーリング（c=3）と、深度の調和平均プーリング。
    ブロック内に背景画素があれば latent depth は +inf。
    """
    img = np.asarray(image, dtype=np.float64)
    dep = np.asarray(depth, dtype=np.float64)
    h, w = dep.shape
    ds = int(downsample)
    if h % ds or w % ds:
        raise ValueError(f"image {w}x{h} not divisible by downsample {ds}")
    blocks = img.reshape(h // ds, ds, w // ds, ds, -1)
    latent = blocks.mean(axis=(1, 3)).astype(np.float32)
    inv = (1.0 / dep).reshape(h // ds, ds, w // ds, ds)
    covered = np.isfinite(dep).reshape(h // ds, ds, w // ds, ds).all(axis=(1, 3))
    with np.errstate(divide="ignore"):
        lat_depth = np.where(covered, 1.0 / inv.mean(axis=(1, 3)), np.inf)
    return latent, lat_depth

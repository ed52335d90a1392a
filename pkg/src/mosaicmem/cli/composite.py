# cli/composite.py
"""検索結果の warped latent を query の latent キャンバスに z-buffer で貼り合わせる"""
from __future__ import annotations
import pathlib

import numpy as np

from mosaicmem.geometry.grid import LatentGrid
from mosaicmem.storage.ppm import write_ppm
from mosaicmem.storage.retrieval_dir import RetrievalBundle

MAGENTA = np.array([1.0, 0.0, 1.0])


def composite(bundle: RetrievalBundle):
    """
    Returns:
        canvas: (h,w,c) 未被覆は 0
        covered: (h,w)
        depth: (h,w) 採用したトークンの query 深度（未被覆は +inf）
    """
    h, w = LatentGrid(downsample=bundle.downsample).latent_shape(bundle.query_camera.intrinsics)
    c = bundle.records[0].values.shape[-1] if bundle.records else 3
    canvas = np.zeros((h, w, c))
    depth = np.full((h, w), np.inf)
    for rec in bundle.records:
        ok = rec.latent_valid
        cols = rec.target_cells[..., 0][ok]
        rows = rec.target_cells[..., 1][ok]
        z = rec.query_depth[ok]
        vals = rec.values[ok]
        for r, cc, zz, vv in zip(rows, cols, z, vals):
            if zz < depth[r, cc]:
                depth[r, cc] = zz
                canvas[r, cc] = vv
    return canvas, np.isfinite(depth), depth


def preview_image(canvas: np.ndarray, covered: np.ndarray, upscale: int = 1) -> np.ndarray:
    """RGB 表示用。未被覆はマゼンタ、最近傍で upscale 倍に拡大。"""
    rgb = canvas[..., :3] if canvas.shape[-1] >= 3 else np.repeat(canvas[..., :1], 3, axis=-1)
    img = np.where(covered[..., None], np.clip(rgb, 0.0, 1.0), MAGENTA)
    if upscale > 1:
        img = np.kron(img, np.ones((upscale, upscale, 1)))
    return img


def write_preview(path: str | pathlib.Path, image: np.ndarray) -> pathlib.Path:
    """拡張子が .png なら matplotlib、それ以外は PPM (P6)"""
    out = pathlib.Path(path)
    if out.suffix.lower() == ".png":
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        plt.imsave(out, np.clip(image, 0.0, 1.0))
    else:
        write_ppm(out, image)
    return out

# metrics/consistency.py
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .image import psnr, ssim


@dataclass
class RegionScore:
    a: int
    b: int
    pixels: int
    psnr: float
    ssim: Optional[float]


@dataclass
class ConsistencyReport:
    regions: List[RegionScore] = field(default_factory=list)
    psnr: Optional[float] = None
    ssim: Optional[float] = None
    lpips: None = None

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def to_dict(self) -> dict:
        return {
            "psnr": self.psnr,
            "ssim": self.ssim,
            "lpips": None,
            "n_regions": self.n_regions,
            "regions": [r.__dict__ for r in self.regions],
        }


def warp_by_correspondence(frame_a: np.ndarray, matches: np.ndarray, shape: Tuple[int, int]):
    """
    a の色を対応点 (u_b, v_b) の最近傍画素に書き込む。
    Returns: warped (H,W,C), mask (H,W)
    """
    img = np.asarray(frame_a, dtype=np.float64)
    h, w = shape
    warped = np.zeros((h, w) + img.shape[2:])
    mask = np.zeros((h, w), dtype=bool)
    if len(matches) == 0:
        return warped, mask
    m = np.asarray(matches, dtype=np.float64)
    ua = m[:, 0].astype(np.int64)
    va = m[:, 1].astype(np.int64)
    ub = np.rint(m[:, 2]).astype(np.int64)
    vb = np.rint(m[:, 3]).astype(np.int64)
    inside = (ub >= 0) & (ub < w) & (vb >= 0) & (vb < h)
    warped[vb[inside], ub[inside]] = img[va[inside], ua[inside]]
    mask[vb[inside], ub[inside]] = True
    return warped, mask


def consistency_score(frames: Sequence[np.ndarray] | Dict[int, np.ndarray],
                      correspondences: Sequence[Tuple[int, int, np.ndarray]],
                      targets: Optional[Dict[int, np.ndarray]] = None) -> ConsistencyReport:
    """
    frames: index → 画像。correspondences: (a, b, matches)。
    targets を与えると b 側の比較画像をそれに差し替える（生成結果の評価用）。
    集計値は画素数で重み付けした平均。
    """
    report = ConsistencyReport()
    weights = []
    for a, b, matches in correspondences:
        target = (targets or {}).get(b, frames[b])
        target = np.asarray(target, dtype=np.float64)
        warped, mask = warp_by_correspondence(frames[a], matches, target.shape[:2])
        n = int(mask.sum())
        if n == 0:
            continue
        try:
            s = ssim(warped, target, mask)
        except ValueError:
            s = None
        report.regions.append(RegionScore(a=int(a), b=int(b), pixels=n, psnr=psnr(warped, target, mask), ssim=s))
        weights.append(n)

    if report.regions:
        w = np.array(weights, dtype=np.float64)
        report.psnr = float(np.average([r.psnr for r in report.regions], weights=w))
        scored = [(r.ssim, r.pixels) for r in report.regions if r.ssim is not None]
        if scored:
            report.ssim = float(np.average([s for s, _ in scored], weights=[n for _, n in scored]))
    return report


def dynamic_score(flow_fields: Sequence[np.ndarray], masks: Optional[Sequence[np.ndarray]] = None) -> float:
    """全フレーム・全画素（mask があればその画素）の flow の L2 ノルム平均"""
    total, count = 0.0, 0
    for i, flow in enumerate(flow_fields):
        f = np.asarray(flow, dtype=np.float64)
        mag = np.sqrt(f[..., 0] ** 2 + f[..., 1] ** 2)
        if masks is not None:
            mag = mag[np.asarray(masks[i], dtype=bool)]
        total += float(mag.sum())
        count += mag.size
    return total / count if count else 0.0

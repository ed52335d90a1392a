# metrics/pose.py
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mosaicmem.model.models import Camera, ORTHO_TOL


@dataclass(frozen=True)
class PoseError:
    rot_err: float     # deg
    trans_err: float   # 無次元

    def __post_init__(self):
        if not 0.0 <= self.rot_err <= 180.0:
            raise ValueError(f"rot_err out of range: {self.rot_err}")
        if not self.trans_err >= 0.0:
            raise ValueError(f"trans_err must be >= 0: {self.trans_err}")


def _as_rotation(r, name: str) -> np.ndarray:
    m = np.asarray(r, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got {m.shape}")
    if np.abs(m.T @ m - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(m) - 1.0) > ORTHO_TOL:
        raise ValueError(f"{name} is not a rotation")
    return m


def rot_err(r_gt, r_est) -> float:
    """測地距離 arccos((tr(R_gtᵀ R_est) - 1)/2) [deg]。cos は [-1,1] にクリップ。"""
    rel = _as_rotation(r_gt, "R_gt").T @ _as_rotation(r_est, "R_est")
    cos = min(1.0, max(-1.0, 0.5 * (np.trace(rel) - 1.0)))
    # atan2(sin, cos) で評価
    skew = np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
    sin = min(1.0, 0.5 * float(np.linalg.norm(skew)))
    return math.degrees(math.atan2(sin, cos))


def trans_err(t_gt, t_est, normalizer: float) -> float:
    if not normalizer > 0:
        raise ValueError(f"normalizer must be positive: {normalizer}")
    diff = np.asarray(t_gt, dtype=np.float64) - np.asarray(t_est, dtype=np.float64)
    return float(np.linalg.norm(diff)) / float(normalizer)


def path_length(cameras: Sequence[Camera]) -> float:
    centers = np.array([c.pose.center() for c in cameras])
    if len(centers) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(centers, axis=0), axis=1).sum())


def trajectory_errors(gt: Sequence[Camera], est: Sequence[Camera]) -> PoseError:
    """フレーム平均の RotErr と、GT 経路長で正規化したカメラ中心の誤差"""
    if len(gt) != len(est) or not gt:
        raise ValueError("camera sequences must be non-empty and of equal length")
    length = path_length(gt)
    if length <= 0:
        raise ValueError("ground-truth trajectory has zero length")
    rots = [rot_err(g.pose.rotation, e.pose.rotation) for g, e in zip(gt, est)]
    trans = [trans_err(g.pose.center(), e.pose.center(), length) for g, e in zip(gt, est)]
    return PoseError(float(np.mean(rots)), float(np.mean(trans)))

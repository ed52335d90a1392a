# simulator/trajectory.py
from __future__ import annotations
import warnings
from dataclasses import dataclass, field
from typing import Any, List, Mapping, Optional, Tuple

import numpy as np

from mosaicmem.model.models import Camera, Intrinsics
from mosaicmem.geometry.camera import look_at, project_points
from .scene import SyntheticScene

KINDS = ("forward", "orbit", "revisit_loop")
MIN_OVERLAP = 0.3


@dataclass(eq=False)
class Trajectory:
    cameras: List[Camera]
    kind: str
    revisit_pairs: List[Tuple[int, int]] = field(default_factory=list)
    overlaps: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cameras)

    def centers(self) -> np.ndarray:
        return np.array([c.pose.center() for c in self.cameras])


def make_intrinsics(width: int = 256, height: int = 256, fov_deg: float = 90.0) -> Intrinsics:
    """水平画角から fx=fy を決め、主点は画像中心 ((W-1)/2, (H-1)/2)"""
    f = (width / 2.0) / np.tan(np.radians(fov_deg) / 2.0)
    return Intrinsics(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, width=width, height=height)


def frustum_overlap(scene: SyntheticScene, cam_a: Camera, cam_b: Camera) -> float:
    """a の視錐台内の点のうち b の視錐台にも入る割合（遮蔽は無視）"""
    _, _, va = project_points(cam_a, scene.points)
    _, _, vb = project_points(cam_b, scene.points)
    na = int(va.sum())
    if na == 0:
        return 0.0
    return float((va & vb).sum()) / na


def revisit_frequency(trajectory: Trajectory) -> float:
    """revisit ペアに含まれるフレームの割合"""
    if len(trajectory) == 0:
        return 0.0
    frames = {i for pair in trajectory.revisit_pairs for i in pair}
    return len(frames) / len(trajectory)


# --- 生成 --------------------------------------------------------------------

def generate_trajectory(kind: str, params: Optional[Mapping[str, Any]], scene: SyntheticScene,
                        intrinsics: Optional[Intrinsics] = None) -> Trajectory:
    params = dict(params or {})
    params.pop("kind", None)
    k = intrinsics or make_intrinsics()
    builders = {"forward": _forward, "orbit": _orbit, "revisit_loop": _revisit_loop}
    if kind not in builders:
        raise ValueError(f"unknown trajectory kind: {kind} (expected one of {KINDS})")
    try:
        return builders[kind](k, scene, **params)
    except TypeError as e:
        raise ValueError(f"invalid {kind} trajectory parameters: {e}") from e


def _forward(k: Intrinsics, scene: SyntheticScene, n_frames: int = 16, start=(0.0, 0.0, 0.0),
             direction=(0.0, 0.0, 1.0), step: float = 0.1) -> Trajectory:
    if n_frames < 1 or step <= 0:
        raise ValueError("forward: n_frames >= 1 and step > 0 required")
    d = np.asarray(direction, dtype=np.float64)
    d /= np.linalg.norm(d)
    s = np.asarray(start, dtype=np.float64)
    cams = []
    for i in range(n_frames):
        eye = s + i * step * d
        cams.append(Camera(k, look_at(eye, eye + d)))
    return Trajectory(cams, "forward")


def _orbit(k: Intrinsics, scene: SyntheticScene, n_frames: int = 8, radius: float = 5.0,
           height: float = 0.0, center=None, arc_deg: float = 360.0) -> Trajectory:
    if n_frames < 1 or radius <= 0:
        raise ValueError("orbit: n_frames >= 1 and radius > 0 required")
    c = scene.centroid() if center is None else np.asarray(center, dtype=np.float64)
    full = abs(arc_deg - 360.0) < 1e-9
    angles = np.radians(arc_deg) * np.arange(n_frames) / (n_frames if full else max(n_frames - 1, 1))
    cams = []
    for a in angles:
        eye = c + np.array([radius * np.sin(a), height, -radius * np.cos(a)])
        cams.append(Camera(k, look_at(eye, c)))
    return Trajectory(cams, "orbit")


def _revisit_loop(k: Intrinsics, scene: SyntheticScene, n_frames: int = 20, start=None, end=None,
                  target=None, lane_offset: Optional[float] = None, min_gap: int = 2,
                  min_overlap: float = MIN_OVERLAP) -> Trajectory:
    """
    A→B→A。復路は進行方向に直交する方向へ lane_offset ずらす。
    復路の各フレームを往路の最も近いフレームと組にし、重なり不足のペアは捨てる。
    """
    if n_frames < 4:
        raise ValueError("revisit_loop needs n_frames >= 4")
    centroid = scene.centroid()
    a = np.array([-1.0, 0.0, centroid[2] - 5.0]) if start is None else np.asarray(start, dtype=np.float64)
    b = a + np.array([2.0, 0.0, 0.0]) if end is None else np.asarray(end, dtype=np.float64)
    tgt = centroid if target is None else np.asarray(target, dtype=np.float64)
    path = b - a
    length = float(np.linalg.norm(path))
    if length <= 0:
        raise ValueError("revisit_loop: start and end must differ")
    side = np.cross(path / length, np.array([0.0, -1.0, 0.0]))
    if np.linalg.norm(side) < 1e-9:
        side = np.array([1.0, 0.0, 0.0])
    side /= np.linalg.norm(side)
    offset = 0.1 * length if lane_offset is None else float(lane_offset)

    n_out = (n_frames + 1) // 2
    n_back = n_frames - n_out
    eyes = [a + path * i / max(n_out - 1, 1) for i in range(n_out)]
    eyes += [b - path * (i + 1) / n_back + side * offset for i in range(n_back)]
    # 視線方向は始点のまま平行移動
    cams = [Camera(k, look_at(e, tgt + (e - a))) for e in eyes]

    pairs, overlaps = [], []
    outbound = np.array(eyes[:n_out])
    for j in range(n_out, n_frames):
        i = int(np.argmin(np.linalg.norm(outbound - eyes[j], axis=1)))
        if j - i < min_gap:
            continue
        ov = frustum_overlap(scene, cams[i], cams[j])
        if ov >= min_overlap:
            pairs.append((i, j))
            overlaps.append(ov)
        else:
            warnings.warn(f"revisit pair ({i},{j}) dropped: overlap {ov:.2f} < {min_overlap}")
    if not pairs:
        raise ValueError("revisit_loop: no revisit pair satisfies the overlap constraint")
    return Trajectory(cams, "revisit_loop", pairs, overlaps)

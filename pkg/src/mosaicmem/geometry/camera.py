# geometry/camera.py
"""
ピンホールカメラの基本演算。

- 規約: x_cam = R · x_world + t（world→camera）
- 画素座標は連続値（画素 i の中心が座標 i）
- Π は常に小数座標を返し、範囲外は valid フラグで示す（クランプしない）
"""
from __future__ import annotations
from typing import Tuple

import numpy as np

from mosaicmem.model.models import Camera, Pose, PixelCoord, ProjectionMatrix


# ---------- 配列版 ----------

def to_camera_frame(camera: Camera, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return pts @ camera.pose.rotation.T + camera.pose.translation


def project_points(camera: Camera, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    points: (...,3) world座標
    Returns:
        uv: (...,2) 画素座標（小数）
        depth: (...) カメラ座標系の z
        valid: (...) depth>0 かつ画像内
    """
    k = camera.intrinsics
    xc = to_camera_frame(camera, points)
    z = xc[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * xc[..., 0] / z + k.cx
        v = k.fy * xc[..., 1] / z + k.cy
    valid = (z > 0) & k.contains(u, v)
    return np.stack([u, v], axis=-1), z, valid


def back_project_pixels(camera: Camera, uv: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """uv: (...,2), depth: (...) → world座標 (...,3)。depth<=0 は拒否。"""
    k = camera.intrinsics
    uv = np.asarray(uv, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(~(d > 0)):
        raise ValueError("depth must be positive")
    xc = np.stack([
        (uv[..., 0] - k.cx) / k.fx * d,
        (uv[..., 1] - k.cy) / k.fy * d,
        d * np.ones_like(uv[..., 0]),
    ], axis=-1)
    # x_world = Rᵀ (x_cam - t)
    return (xc - camera.pose.translation) @ camera.pose.rotation


def reproject_pixels(uv: np.ndarray, depth: np.ndarray, cam_i: Camera, cam_j: Camera):
    """
    (u',v') = Π(K_j T_j T_i⁻¹ K_i⁻¹ (u,v,D)) の配列版。
    Returns: uv' (...,2), depth_j (...), valid (...)
    """
    world = back_project_pixels(cam_i, uv, depth)
    return project_points(cam_j, world)


# ---------- スカラ版 ----------

def project(camera: Camera, point) -> Tuple[PixelCoord, float]:
    uv, z, valid = project_points(camera, np.asarray(point, dtype=np.float64).reshape(3))
    return PixelCoord(float(uv[0]), float(uv[1]), bool(valid)), float(z)


def back_project(camera: Camera, coord: PixelCoord, depth: float) -> np.ndarray:
    if not depth > 0:
        raise ValueError(f"depth must be positive: {depth}")
    return back_project_pixels(camera, np.array([coord.u, coord.v]), np.array(depth))


def reproject(coord: PixelCoord, depth: float, cam_i: Camera, cam_j: Camera) -> PixelCoord:
    if not depth > 0:
        raise ValueError(f"depth must be positive: {depth}")
    uv, _, valid = reproject_pixels(np.array([coord.u, coord.v]), np.array(depth), cam_i, cam_j)
    return PixelCoord(float(uv[0]), float(uv[1]), bool(valid))


def relative_projection(p1, p2) -> np.ndarray:
    """P̃₁ · P̃₂⁻¹。p2 が特異なら LinAlgError。"""
    m1 = p1.mat if isinstance(p1, ProjectionMatrix) else np.asarray(p1, dtype=np.float64)
    m2 = p2.mat if isinstance(p2, ProjectionMatrix) else np.asarray(p2, dtype=np.float64)
    if abs(np.linalg.det(m2)) <= 1e-12:
        raise np.linalg.LinAlgError("p2 is singular")
    # X · P₂ = P₁  ⇔  P₂ᵀ Xᵀ = P₁ᵀ
    return np.linalg.solve(m2.T, m1.T).T


def look_at(eye, target, up=(0.0, -1.0, 0.0)) -> Pose:
    """
    eye から target を向くカメラ姿勢（OpenCV系: x右, y下, z前）。
    world の「上」は既定で -y。
    """
    eye = np.asarray(eye, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=np.float64))
    n = np.linalg.norm(x)
    if n < 1e-12:
        raise ValueError("view direction is parallel to up vector")
    x /= n
    y = np.cross(z, x)
    rot = np.stack([x, y, z])
    return Pose(rot, -rot @ eye)

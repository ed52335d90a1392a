from __future__ import annotations
from dataclasses import dataclass
from typing import Tuple

import numpy as np

Vec3 = Tuple[float, float, float]

ORTHO_TOL = 1e-9
DET_TOL = 1e-12


def _frozen_array(value, shape: Tuple[int, ...], name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


def _check_rotation(rot: np.ndarray, name: str = "rotation") -> None:
    if np.abs(rot.T @ rot - np.eye(3)).max() > ORTHO_TOL:
        raise ValueError(f"{name} is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > ORTHO_TOL:
        raise ValueError(f"{name} must have det=+1")


# --- カメラ -------------------------------------------------------------

@dataclass(frozen=True)
class Intrinsics:
    """ピンホール内部パラメータ（単位: pixel）"""
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal length must be positive: fx={self.fx} fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive: {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"principal point ({self.cx},{self.cy}) outside {self.width}x{self.height}")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]], dtype=np.float64)

    def contains(self, u, v):
        return (u >= 0) & (u < self.width) & (v >= 0) & (v < self.height)


@dataclass(frozen=True, eq=False)
class Pose:
    """
    外部パラメータ。規約は world→camera 固定:
        x_cam = R · x_world + t
    """
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _frozen_array(self.rotation, (3, 3), "rotation")
        _check_rotation(rot)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,), "translation"))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def center(self) -> np.ndarray:
        """カメラ中心（world座標）"""
        return -self.rotation.T @ self.translation

    def inverse(self) -> "Pose":
        """camera→world の変換を Pose として返す"""
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return (np.allclose(self.rotation, other.rotation, atol=atol)
                and np.allclose(self.translation, other.translation, atol=atol))


@dataclass(frozen=True, eq=False)
class Camera:
    """Intrinsics + Pose の組。1フレーム分の射影を定義する。"""
    intrinsics: Intrinsics
    pose: Pose

    def projection_matrix(self) -> "ProjectionMatrix":
        # K を 4x4 に埋め込む: 左上 3x3 に K、(4,4)=1、他は 0
        k4 = np.eye(4)
        k4[:3, :3] = self.intrinsics.matrix()
        return ProjectionMatrix(k4 @ self.pose.matrix())

    def with_pose(self, pose: Pose) -> "Camera":
        return Camera(self.intrinsics, pose)

    def allclose(self, other: "Camera", atol: float = 1e-9) -> bool:
        return self.intrinsics == other.intrinsics and self.pose.allclose(other.pose, atol=atol)


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """4x4 射影行列 P̃ = K4 · T（可逆であること）"""
    mat: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.mat, (4, 4), "projection matrix")
        if abs(np.linalg.det(m)) <= DET_TOL:
            raise np.linalg.LinAlgError("projection matrix is singular")
        object.__setattr__(self, "mat", m)

    def normalized(self) -> np.ndarray:
        """(4,4) 要素の絶対値で割る。ほぼ 0 ならフロベニウスノルムで割る。"""
        scale = abs(self.mat[3, 3])
        if scale < 1e-12:
            scale = np.linalg.norm(self.mat)
        return self.mat / scale


@dataclass(frozen=True)
class PixelCoord:
    """連続画像座標。小数部は保持し、範囲外は valid=False（クランプしない）"""
    u: float
    v: float
    valid: bool = True


# --- 編集用の変換 --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RigidTransform:
    """x' = s · R · x + t（一様スケール付き剛体変換）"""
    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        rot = _frozen_array(self.rotation, (3, 3), "rotation")
        _check_rotation(rot)
        if not self.scale > 0:
            raise ValueError(f"scale must be positive: {self.scale}")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", _frozen_array(self.translation, (3,), "translation"))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), 1.0)

    @classmethod
    def translation_only(cls, offset) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(offset, dtype=np.float64), 1.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation) / self.scale, 1.0 / self.scale)

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """self ∘ inner（inner を先に適用）"""
        return RigidTransform(
            self.rotation @ inner.rotation,
            self.scale * self.rotation @ inner.translation + self.translation,
            self.scale * inner.scale,
        )

    def apply_pose(self, pose: Pose) -> Pose:
        """
        変換後の点を変換前と同じ画素に写すカメラ姿勢を返す。
        カメラ座標は scale 倍になる（深度も scale 倍）。
        """
        rot = pose.rotation @ self.rotation.T
        trans = self.scale * pose.translation - rot @ self.translation
        return Pose(rot, trans)

    def apply_camera(self, camera: Camera) -> Camera:
        return camera.with_pose(self.apply_pose(camera.pose))


__all__ = [
    "Vec3",
    "Intrinsics",
    "Pose",
    "Camera",
    "ProjectionMatrix",
    "PixelCoord",
    "RigidTransform",
]

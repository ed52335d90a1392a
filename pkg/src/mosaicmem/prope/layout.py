# prope/layout.py
from __future__ import annotations
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from mosaicmem.model.models import ProjectionMatrix


@dataclass(frozen=True, eq=False)
class CameraPack:
    """(L, s, 4, 4)。pack[ℓ][k] = 原フレーム s·ℓ+k のカメラ。padded は末尾の複製数。"""
    matrices: np.ndarray
    padded: int = 0

    def __post_init__(self):
        m = np.array(self.matrices, dtype=np.float64)
        if m.ndim != 4 or m.shape[2:] != (4, 4):
            raise ValueError(f"camera pack must be (L,s,4,4), got {m.shape}")
        dets = np.abs(np.linalg.det(m))
        if np.any(dets <= 1e-12):
            raise np.linalg.LinAlgError("camera pack contains a singular matrix")
        m.flags.writeable = False
        object.__setattr__(self, "matrices", m)

    @property
    def latent_frames(self) -> int:
        return self.matrices.shape[0]

    @property
    def s(self) -> int:
        return self.matrices.shape[1]

    def __getitem__(self, idx) -> np.ndarray:
        return self.matrices[idx]


def _as_matrix(cam) -> np.ndarray:
    if isinstance(cam, ProjectionMatrix):
        return cam.mat
    if hasattr(cam, "projection_matrix"):
        return cam.projection_matrix().mat
    return ProjectionMatrix(cam).mat


def unfold_temporal(per_frame_cameras: Sequence, s: int = 4) -> CameraPack:
    """
    原フレームごとのカメラを (L, s) に並べる。
    フレーム数が s で割り切れなければ最後のカメラを繰り返して埋める。
    """
    if s < 1:
        raise ValueError(f"s must be >= 1: {s}")
    mats = [_as_matrix(c) for c in per_frame_cameras]
    if not mats:
        raise ValueError("no cameras to unfold")
    pad = (-len(mats)) % s
    if pad:
        warnings.warn(f"{len(mats)} frames not divisible by s={s}; repeating the last camera {pad} times")
        mats += [mats[-1]] * pad
    arr = np.stack(mats).reshape(len(mats) // s, s, 4, 4)
    return CameraPack(arr, padded=pad)


@dataclass(frozen=True)
class TokenLayout:
    """
    token t = ℓ·H·W + row·W + col。
    sub_index k は条件付けの属性（token 数は増やさない）。既定は (row·W + col) mod s。
    """
    latent_frames: int
    height: int
    width: int
    s: int = 4
    sub_index: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if min(self.latent_frames, self.height, self.width, self.s) < 1:
            raise ValueError("layout dimensions must be >= 1")
        if self.sub_index is not None:
            k = tuple(int(x) for x in self.sub_index)
            if len(k) != self.token_count or min(k) < 0 or max(k) >= self.s:
                raise ValueError("sub_index must give one k in [0,s) per token")
            object.__setattr__(self, "sub_index", k)

    @property
    def token_count(self) -> int:
        return self.latent_frames * self.height * self.width

    def decode(self, token: int) -> Tuple[int, int, int, int]:
        """token → (ℓ, k, row, col)"""
        if not 0 <= token < self.token_count:
            raise IndexError(f"token {token} out of range")
        hw = self.height * self.width
        ell, rem = divmod(int(token), hw)
        row, col = divmod(rem, self.width)
        k = self.sub_index[token] if self.sub_index is not None else rem % self.s
        return ell, k, row, col

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """全 token の (ℓ, k, row, col)"""
        t = np.arange(self.token_count)
        hw = self.height * self.width
        ell, rem = np.divmod(t, hw)
        row, col = np.divmod(rem, self.width)
        k = np.array(self.sub_index) if self.sub_index is not None else rem % self.s
        return ell, k, row, col

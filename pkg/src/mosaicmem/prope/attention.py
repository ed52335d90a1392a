# prope/attention.py
"""
PRoPE: token ごとのブロック対角変換 D_t = diag(I_{d/8} ⊗ P̃_t, RoPE_t) を attention の前後に掛ける。

    q̃ = D_tᵀ q,  k̃ = D_t⁻¹ k,  ṽ = D_t⁻¹ v
    o_t = D_t · softmax(q̃ k̃ᵀ / √d) ṽ

D は密行列にせず、4×4 の繰り返し積と 2×2 回転で適用する（dense_matrix はテスト用）。
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from mosaicmem.model.models import ProjectionMatrix
from mosaicmem.warping.rope import RopePhaseTable, rope_phases, apply_rope
from .layout import CameraPack, TokenLayout

if TYPE_CHECKING:
    from mosaicmem.memory.retrieval import RetrievedPatch
    from mosaicmem.memory.store import MosaicMemory


@dataclass(frozen=True)
class PRoPEConfig:
    head_dim: int
    rope: Optional[RopePhaseTable] = None
    temporal_compression: int = 4
    normalize: bool = True

    def __post_init__(self):
        if self.head_dim <= 0 or self.head_dim % 8:
            raise ValueError(f"head_dim must be a positive multiple of 8: {self.head_dim}")
        if self.rope is None:
            object.__setattr__(self, "rope", RopePhaseTable(self.head_dim // 2))
        if self.rope.head_dim != self.head_dim // 2:
            raise ValueError(f"RoPE table must cover head_dim/2={self.head_dim // 2}, got {self.rope.head_dim}")
        if self.temporal_compression < 1:
            raise ValueError("temporal_compression must be >= 1")


@dataclass(frozen=True, eq=False)
class Blocks:
    """N token 分のブロック記述子。angles は (N, d/4) か head ごとの (heads, N, d/4)。"""
    cameras: np.ndarray
    inverses: np.ndarray
    angles: np.ndarray
    head_dim: int

    def __len__(self) -> int:
        return self.cameras.shape[0]

    def take(self, index) -> "Blocks":
        idx = np.atleast_1d(np.asarray(index))
        return Blocks(self.cameras[idx], self.inverses[idx], self.angles[..., idx, :], self.head_dim)

    def concat(self, other: "Blocks") -> "Blocks":
        if other.head_dim != self.head_dim:
            raise ValueError("head_dim mismatch")
        return Blocks(np.concatenate([self.cameras, other.cameras]),
                      np.concatenate([self.inverses, other.inverses]),
                      np.concatenate([self.angles, other.angles], axis=-2),
                      self.head_dim)


def _normalize(mats: np.ndarray, enabled: bool) -> np.ndarray:
    mats = np.asarray(mats, dtype=np.float64).reshape(-1, 4, 4)
    if not enabled:
        return mats
    return np.stack([ProjectionMatrix(m).normalized() for m in mats])


def _angles(coords: np.ndarray, config: PRoPEConfig, tables: Optional[Sequence[RopePhaseTable]]) -> np.ndarray:
    if tables is None:
        return rope_phases(coords, config.rope)
    for t in tables:
        if t.head_dim != config.head_dim // 2:
            raise ValueError("every head table must cover head_dim/2")
    return np.stack([rope_phases(coords, t) for t in tables])


def _make(cams: np.ndarray, coords: np.ndarray, config: PRoPEConfig,
          tables: Optional[Sequence[RopePhaseTable]]) -> Blocks:
    cams = _normalize(cams, config.normalize)
    inv = np.linalg.inv(cams)
    return Blocks(cams, inv, _angles(coords, config, tables), config.head_dim)


# --- ブロック構築 ------------------------------------------------------------

def build_blocks(layout: TokenLayout, pack: CameraPack, config: PRoPEConfig,
                 tables: Optional[Sequence[RopePhaseTable]] = None) -> Blocks:
    """全 token のブロック。RoPE 座標は (ℓ, u=col, v=row)。"""
    ell, k, row, col = layout.arrays()
    if layout.latent_frames > pack.latent_frames or layout.s > pack.s:
        raise ValueError(f"layout {layout.latent_frames}x{layout.s} exceeds camera pack "
                         f"{pack.latent_frames}x{pack.s}")
    coords = np.stack([ell, col, row], axis=-1).astype(np.float64)
    return _make(pack.matrices[ell, k], coords, config, tables)


def build_block(token: int, layout: TokenLayout, pack: CameraPack, config: PRoPEConfig) -> Blocks:
    ell, k, row, col = layout.decode(token)
    if ell >= pack.latent_frames or k >= pack.s:
        raise ValueError(f"token {token} maps outside the camera pack")
    return _make(pack[ell, k][None], np.array([[ell, col, row]], dtype=np.float64), config, None)


def conditioning_blocks(retrieved: Sequence["RetrievedPatch"], memory: "MosaicMemory", config: PRoPEConfig,
                        tables: Optional[Sequence[RopePhaseTable]] = None) -> Tuple[Blocks, List[Tuple[int, int, int]]]:
    """
    検索されたメモリ token 用のブロック。カメラは source フレームのもの（k=0）、
    RoPE 座標は warped 座標 (j, u', v')。有効 token のみ、パッチ内は行優先。
    Returns: (blocks, [(patch_id, r, c), ...])
    """
    cams, coords, index = [], [], []
    for r in retrieved:
        patch = memory.get(r.patch_id)
        mat = patch.source_camera.projection_matrix().mat
        rows, cols = np.nonzero(r.valid)
        for rr, cc in zip(rows, cols):
            cams.append(mat)
            coords.append(r.warped_coords[rr, cc])
            index.append((r.patch_id, int(rr), int(cc)))
    if not cams:
        n = config.head_dim // 4
        empty = np.zeros((0, n)) if tables is None else np.zeros((len(tables), 0, n))
        return Blocks(np.zeros((0, 4, 4)), np.zeros((0, 4, 4)), empty, config.head_dim), []
    return _make(np.array(cams), np.array(coords), config, tables), index


# --- 適用 --------------------------------------------------------------------

def apply_blocks(x: np.ndarray, blocks: Blocks, mode: str = "forward") -> np.ndarray:
    """
    x: (..., N, d)。mode: "forward" (D), "transpose" (Dᵀ), "inverse" (D⁻¹)
    """
    x = np.asarray(x, dtype=np.float64)
    d = blocks.head_dim
    if x.shape[-1] != d or x.shape[-2] != len(blocks):
        raise ValueError(f"expected (..., {len(blocks)}, {d}), got {x.shape}")
    if mode == "forward":
        mats, sign = blocks.cameras, 1.0
    elif mode == "transpose":
        mats, sign = np.swapaxes(blocks.cameras, -1, -2), -1.0
    elif mode == "inverse":
        mats, sign = blocks.inverses, -1.0
    else:
        raise ValueError(f"unknown mode: {mode}")
    half = d // 2
    proj = x[..., :half].reshape(x.shape[:-1] + (d // 8, 4))
    proj = np.einsum("nij,...nbj->...nbi", mats, proj).reshape(x.shape[:-1] + (half,))
    rot = apply_rope(x[..., half:], sign * blocks.angles)
    return np.concatenate([proj, rot], axis=-1)


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def vanilla_attention(q, k, v, return_weights: bool = False):
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    w = _softmax(q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1]))
    out = w @ v
    return (out, w) if return_weights else out


def prope_attention(q, k, v, blocks: Blocks, kv_blocks: Optional[Blocks] = None,
                    return_weights: bool = False):
    """
    q: (..., N, d)、k/v: (..., M, d)。kv_blocks 省略時は blocks（N=M）。
    heads 次元は先頭に置く（カメラは共通、RoPE は blocks.angles が heads を持てば head ごと）。
    """
    kv = blocks if kv_blocks is None else kv_blocks
    qt = apply_blocks(q, blocks, "transpose")
    kt = apply_blocks(k, kv, "inverse")
    vt = apply_blocks(v, kv, "inverse")
    out, w = vanilla_attention(qt, kt, vt, return_weights=True)
    out = apply_blocks(out, blocks, "forward")
    return (out, w) if return_weights else out


def dense_matrix(blocks: Blocks, i: int, head: Optional[int] = None) -> np.ndarray:
    """token i の d×d 行列（検証用）"""
    d = blocks.head_dim
    mat = np.zeros((d, d))
    for b in range(d // 8):
        mat[4 * b:4 * b + 4, 4 * b:4 * b + 4] = blocks.cameras[i]
    ang = blocks.angles[i] if blocks.angles.ndim == 2 else blocks.angles[head, i]
    half = d // 2
    for m, a in enumerate(ang):
        j = half + 2 * m
        mat[j:j + 2, j:j + 2] = [[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]
    return mat

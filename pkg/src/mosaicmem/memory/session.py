# memory/session.py
"""
長尺生成のメモリ更新ループ（幾何部分のみ）。

動画をセグメント単位で生成し、各フレームは生成前にメモリから検索、
セグメント完了後に lift して挿入する。セグメントの最終フレームは次セグメントの先頭になる。
生成器は呼び出し側が与える（テストでは simulator のレンダラ）。
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.grid import LatentGrid
from .store import MosaicMemory
from .retrieval import RetrievalConfig, RetrievedPatch, retrieve, first_frame_footprint

# generate(frame_index, camera, retrieved, memory) -> (latent (h,w,c), latent_depth (h,w))
Generator = Callable[[int, Camera, List[RetrievedPatch], MosaicMemory], Tuple[np.ndarray, np.ndarray]]


@dataclass
class SegmentReport:
    index: int
    frames: Tuple[int, int]                       # [start, end]
    retrieved: List[int] = field(default_factory=list)
    valid_tokens: List[int] = field(default_factory=list)
    inserted: int = 0
    memory_size: int = 0

    def mean_retrieved(self) -> float:
        return float(np.mean(self.retrieved)) if self.retrieved else 0.0


def segment_bounds(n_frames: int, segment_length: int) -> List[Tuple[int, int]]:
    """[start, end]（両端含む）。隣接セグメントは 1 フレーム共有する。"""
    if segment_length < 2:
        raise ValueError(f"segment_length must be >= 2: {segment_length}")
    bounds = []
    start = 0
    while start < n_frames - 1:
        end = min(start + segment_length - 1, n_frames - 1)
        bounds.append((start, end))
        start = end
    return bounds


def rollout(memory: MosaicMemory, cameras: Sequence[Camera], generate: Generator, *,
            segment_length: int = 80, patch_size: int = 2, grid: Optional[LatentGrid] = None,
            config: Optional[RetrievalConfig] = None, skip_first_frame: bool = False) -> List[SegmentReport]:
    grid = grid or LatentGrid()
    cameras = list(cameras)
    if not cameras:
        raise ValueError("no cameras")

    def insert_frame(f: int, latent: np.ndarray, depth: np.ndarray) -> int:
        return len(memory.lift_and_insert(latent, depth, cameras[f], grid.latent_frame(f),
                                          patch_size, downsample=grid.downsample))

    # 先頭フレームは入力として与えられる
    latent0, depth0 = generate(0, cameras[0], [], memory)
    insert_frame(0, latent0, depth0)

    reports: List[SegmentReport] = []
    for si, (start, end) in enumerate(segment_bounds(len(cameras), segment_length)):
        report = SegmentReport(index=si, frames=(start, end))
        pending = []
        for f in range(start + 1, end + 1):
            t = grid.latent_frame(f)
            skip = None
            if skip_first_frame:
                skip = first_frame_footprint(memory, cameras[f], grid.latent_frame(start), grid.downsample)
            found = retrieve(memory, cameras[f], t, config, skip_region=skip)
            report.retrieved.append(len(found))
            report.valid_tokens.append(sum(r.valid_count for r in found))
            pending.append((f, *generate(f, cameras[f], found, memory)))
        for f, latent, depth in pending:
            report.inserted += insert_frame(f, latent, depth)
        report.memory_size = len(memory)
        reports.append(report)
    return reports

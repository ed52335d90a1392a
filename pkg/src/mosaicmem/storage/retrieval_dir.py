# storage/retrieval_dir.py
"""
検索結果ディレクトリ:
    retrieval.json           query カメラ・時刻・設定・パッチ一覧
    patch_{id:06d}.mmtb      f64 (p,p,8+c)
        0:j 1:u' 2:v' 3:valid 4:query_depth 5:latent_valid 6:target_u 7:target_v 8..:values
"""
from __future__ import annotations
import json
import pathlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.model.loader import camera_from_dict, camera_to_dict
from mosaicmem.memory.retrieval import RetrievedPatch
from mosaicmem.warping.latent import AlignedLatent
from .tensorfile import read_tensor, write_tensor
from .memory_dir import patch_filename

MANIFEST = "retrieval.json"
FIXED_CHANNELS = 8


@dataclass
class RetrievalRecord:
    """1 パッチ分の保存形式（読み戻し用）"""
    patch_id: int
    occlusion_score: float
    alignment: str
    warped_coords: np.ndarray
    valid: np.ndarray
    query_depth: np.ndarray
    latent_valid: np.ndarray
    target_cells: np.ndarray
    values: np.ndarray


@dataclass
class RetrievalBundle:
    query_camera: Camera
    query_time: int
    downsample: int
    settings: dict = field(default_factory=dict)
    records: List[RetrievalRecord] = field(default_factory=list)
    memory_dir: Optional[str] = None


def save_retrieval(out_dir: str | pathlib.Path, query_camera: Camera, query_time: int,
                   retrieved: List[RetrievedPatch], aligned: Dict[int, AlignedLatent],
                   alignment: Dict[int, str], downsample: int, settings: dict | None = None,
                   memory_dir: str | None = None) -> pathlib.Path:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for r in retrieved:
        a = aligned[r.patch_id]
        fixed = np.stack([
            r.warped_coords[..., 0], r.warped_coords[..., 1], r.warped_coords[..., 2],
            r.valid.astype(np.float64), r.query_depth,
            a.validity.astype(np.float64), a.cells[..., 0].astype(np.float64), a.cells[..., 1].astype(np.float64),
        ], axis=-1)
        data = np.concatenate([fixed, a.values.astype(np.float64)], axis=-1)
        name = patch_filename(r.patch_id)
        write_tensor(out / name, data)
        entries.append({
            "patch_id": r.patch_id,
            "file": name,
            "occlusion_score": r.occlusion_score,
            "alignment": alignment.get(r.patch_id, "both"),
        })
    manifest = {
        "version": 1,
        "convention": "world_to_camera",
        "query_camera": camera_to_dict(query_camera),
        "query_time": int(query_time),
        "downsample": int(downsample),
        "memory_dir": memory_dir,
        "settings": settings or {},
        "patches": entries,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return out


def load_retrieval(ret_dir: str | pathlib.Path) -> RetrievalBundle:
    root = pathlib.Path(ret_dir)
    with open(root / MANIFEST, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    bundle = RetrievalBundle(
        query_camera=camera_from_dict(manifest["query_camera"]),
        query_time=int(manifest["query_time"]),
        downsample=int(manifest["downsample"]),
        settings=manifest.get("settings", {}),
        memory_dir=manifest.get("memory_dir"),
    )
    for e in manifest["patches"]:
        data = read_tensor(root / e["file"])
        if data.ndim != 3 or data.shape[2] <= FIXED_CHANNELS:
            raise ValueError(f"{e['file']}: unexpected retrieval tensor shape {data.shape}")
        bundle.records.append(RetrievalRecord(
            patch_id=int(e["patch_id"]),
            occlusion_score=float(e["occlusion_score"]),
            alignment=e.get("alignment", "both"),
            warped_coords=data[..., 0:3],
            valid=data[..., 3] > 0.5,
            query_depth=data[..., 4],
            latent_valid=data[..., 5] > 0.5,
            target_cells=np.rint(data[..., 6:8]).astype(np.int64),
            values=data[..., FIXED_CHANNELS:],
        ))
    return bundle

# storage/memory_dir.py
"""
メモリディレクトリ:
    manifest.json              パッチのメタデータ・カメラ・rope_origin
    patch_{id:06d}.mmtb        f64 (p,p,c+1)  = latent チャネル + depth
"""
from __future__ import annotations
import json
import pathlib

import numpy as np

from mosaicmem.model.loader import ModelLoader, camera_from_dict, camera_to_dict
from mosaicmem.memory.patch import MemoryPatch
from mosaicmem.memory.store import MosaicMemory
from .tensorfile import read_tensor, write_tensor

MANIFEST = "manifest.json"
VERSION = 1


def patch_filename(patch_id: int) -> str:
    return f"patch_{patch_id:06d}.mmtb"


def save_memory(memory: MosaicMemory, out_dir: str | pathlib.Path) -> pathlib.Path:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in memory.snapshot():
        name = patch_filename(p.id)
        data = np.concatenate([p.latent.astype(np.float64), p.depth[..., None]], axis=-1)
        write_tensor(out / name, data)
        entries.append({
            "id": p.id,
            "file": name,
            "source_time": p.source_time,
            "rope_origin": list(p.rope_origin),
            "downsample": p.downsample,
            "camera": camera_to_dict(p.source_camera),
        })
    manifest = {
        "version": VERSION,
        "convention": "world_to_camera",
        "voxel_size": memory.voxel_size,
        "next_id": memory.next_id,
        "patches": entries,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return out


def load_memory(mem_dir: str | pathlib.Path, loader: ModelLoader | None = None) -> MosaicMemory:
    root = pathlib.Path(mem_dir)
    loader = loader or ModelLoader()
    manifest = loader.load_memory_manifest(root / MANIFEST)
    memory = MosaicMemory(manifest.get("voxel_size"))
    patches = []
    for e in manifest["patches"]:
        data = read_tensor(root / e["file"])
        if data.ndim != 3 or data.shape[2] < 2:
            raise ValueError(f"{e['file']}: expected (p,p,c+1) tensor, got {data.shape}")
        patches.append(MemoryPatch(
            id=int(e["id"]),
            latent=data[..., :-1].astype(np.float32),
            depth=data[..., -1],
            source_camera=camera_from_dict(e["camera"]),
            source_time=int(e["source_time"]),
            rope_origin=tuple(e["rope_origin"]),
            downsample=int(e["downsample"]),
        ))
    memory.insert(patches)
    memory.next_id = max(memory.next_id, int(manifest["next_id"]))
    return memory

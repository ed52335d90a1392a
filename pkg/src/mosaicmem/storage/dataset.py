# storage/dataset.py
"""
データセットディレクトリ（manifest.json + MMTB テンソル + 確認用 PPM）。
パスはすべて manifest からの相対。
"""
from __future__ import annotations
import json
import pathlib
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.model.loader import ModelLoader, camera_from_dict, camera_to_dict
from .tensorfile import read_tensor, write_tensor
from .ppm import write_ppm

MANIFEST = "manifest.json"
VERSION = 1


@dataclass(eq=False)
class Frame:
    index: int
    time: float
    camera: Camera
    image: np.ndarray         # (H,W,3) f32 [0,1]
    depth: np.ndarray         # (H,W) f64、背景は +inf
    latent: np.ndarray        # (H/ds,W/ds,3) f32（平均プーリング）
    latent_depth: np.ndarray  # (H/ds,W/ds) f64
    point_ids: np.ndarray     # (H,W) int64、背景は -1


@dataclass(eq=False)
class Correspondence:
    a: int
    b: int
    matches: np.ndarray       # (M,4) = (u_a, v_a, u_b, v_b)、b 側は小数


@dataclass(eq=False)
class FlowField:
    a: int
    b: int
    flow: np.ndarray          # (H,W,2)
    mask: np.ndarray          # (H,W) bool


@dataclass(eq=False)
class Dataset:
    seed: int
    downsample: int
    temporal: int
    trajectory_kind: str
    frames: List[Frame] = field(default_factory=list)
    correspondences: List[Correspondence] = field(default_factory=list)
    flows: List[FlowField] = field(default_factory=list)
    revisit_pairs: List[Tuple[int, int]] = field(default_factory=list)
    root: Optional[pathlib.Path] = None

    @property
    def cameras(self) -> List[Camera]:
        return [f.camera for f in self.frames]

    def frame(self, index: int) -> Frame:
        return self.frames[index]


def _stem(i: int) -> str:
    return f"frame_{i:04d}"


def write_dataset(ds: Dataset, out_dir: str | pathlib.Path, ppm: bool = True) -> pathlib.Path:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = []
    for f in ds.frames:
        s = _stem(f.index)
        entry = {
            "index": f.index,
            "time": f.time,
            "image": f"{s}_image.mmtb",
            "depth": f"{s}_depth.mmtb",
            "latent": f"{s}_latent.mmtb",
            "latent_depth": f"{s}_latent_depth.mmtb",
            "point_ids": f"{s}_ids.mmtb",
        }
        write_tensor(out / entry["image"], f.image.astype(np.float32))
        write_tensor(out / entry["depth"], f.depth.astype(np.float64))
        write_tensor(out / entry["latent"], f.latent.astype(np.float32))
        write_tensor(out / entry["latent_depth"], f.latent_depth.astype(np.float64))
        write_tensor(out / entry["point_ids"], f.point_ids.astype(np.float64))
        if ppm:
            entry["ppm"] = f"{s}.ppm"
            write_ppm(out / entry["ppm"], f.image)
        frames.append(entry)

    corrs = []
    for c in ds.correspondences:
        name = f"corr_{c.a:04d}_{c.b:04d}.mmtb"
        write_tensor(out / name, c.matches.astype(np.float64).reshape(-1, 4))
        corrs.append({"a": c.a, "b": c.b, "path": name})

    flows = []
    for fl in ds.flows:
        name = f"flow_{fl.a:04d}_{fl.b:04d}.mmtb"
        mask = f"flow_{fl.a:04d}_{fl.b:04d}_mask.mmtb"
        write_tensor(out / name, fl.flow.astype(np.float64))
        write_tensor(out / mask, fl.mask.astype(np.uint8))
        flows.append({"a": fl.a, "b": fl.b, "path": name, "mask": mask})

    manifest = {
        "version": VERSION,
        "seed": ds.seed,
        "convention": "world_to_camera",
        "downsample": {"spatial": ds.downsample, "temporal": ds.temporal},
        "trajectory_kind": ds.trajectory_kind,
        "cameras": [camera_to_dict(f.camera) for f in ds.frames],
        "frames": frames,
        "revisit_pairs": [list(p) for p in ds.revisit_pairs],
        "correspondences": corrs,
        "flows": flows,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    ds.root = out
    return out


def read_dataset(root_dir: str | pathlib.Path, loader: ModelLoader | None = None) -> Dataset:
    root = pathlib.Path(root_dir)
    loader = loader or ModelLoader()
    m = loader.load_dataset_manifest(root / MANIFEST)
    cameras = [camera_from_dict(c) for c in m["cameras"]]
    if len(cameras) != len(m["frames"]):
        raise ValueError("camera count does not match frame count")
    ds = Dataset(
        seed=int(m["seed"]),
        downsample=int(m["downsample"]["spatial"]),
        temporal=int(m["downsample"]["temporal"]),
        trajectory_kind=m.get("trajectory_kind", "unknown"),
        revisit_pairs=[tuple(p) for p in m.get("revisit_pairs", [])],
        root=root,
    )
    for e, cam in zip(m["frames"], cameras):
        image = read_tensor(root / e["image"])
        latent = read_tensor(root / e["latent"])
        ids = read_tensor(root / e["point_ids"]) if "point_ids" in e else np.full(image.shape[:2], -1.0)
        if "latent_depth" in e:
            latent_depth = read_tensor(root / e["latent_depth"])
        else:
            latent_depth = np.full(latent.shape[:2], np.inf)
        ds.frames.append(Frame(
            index=int(e["index"]), time=float(e.get("time", e["index"])), camera=cam,
            image=image, depth=read_tensor(root / e["depth"]), latent=latent,
            latent_depth=latent_depth, point_ids=ids.astype(np.int64),
        ))
    for c in m.get("correspondences", []):
        ds.correspondences.append(Correspondence(int(c["a"]), int(c["b"]), read_tensor(root / c["path"])))
    for fl in m.get("flows", []):
        mask = read_tensor(root / fl["mask"]).astype(bool) if "mask" in fl else None
        flow = read_tensor(root / fl["path"])
        ds.flows.append(FlowField(int(fl["a"]), int(fl["b"]), flow,
                                  mask if mask is not None else np.ones(flow.shape[:2], dtype=bool)))
    return ds

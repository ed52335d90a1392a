# simulator/dataset.py
from __future__ import annotations
import pathlib
from typing import List, Optional

import numpy as np

from mosaicmem.model.models import Camera
from mosaicmem.geometry.camera import back_project_pixels, project_points
from mosaicmem.storage.dataset import Correspondence, Dataset, FlowField, Frame, write_dataset
from .render import RenderedFrame, pool_latent, render
from .scene import SyntheticScene
from .trajectory import Trajectory


def correspondences(frame_a: RenderedFrame, frame_b: RenderedFrame) -> np.ndarray:
    """
    a の被覆画素を GT 深度で b に再投影し、b でも同じ点が見えている画素だけ残す。
    Returns: (M,4) = (u_a, v_a, u_b, v_b)、b 側は小数のまま
    """
    va, ua = np.nonzero(frame_a.covered)
    if len(ua) == 0:
        return np.zeros((0, 4))
    uv_a = np.stack([ua, va], axis=-1).astype(np.float64)
    world = back_project_pixels(frame_a.camera, uv_a, frame_a.depth[va, ua])
    uv_b, _, valid = project_points(frame_b.camera, world)
    k = frame_b.camera.intrinsics
    col = np.clip(np.rint(uv_b[:, 0]), 0, k.width - 1).astype(np.int64)
    row = np.clip(np.rint(uv_b[:, 1]), 0, k.height - 1).astype(np.int64)
    same = valid & (frame_b.point_ids[row, col] == frame_a.point_ids[va, ua])
    return np.concatenate([uv_a[same], uv_b[same]], axis=-1)


def ground_truth_flow(scene: SyntheticScene, frame_a: RenderedFrame, frame_b: RenderedFrame,
                      time_a: float, time_b: float):
    """
    a の各画素に写る点の、a → b での投影位置の変化。
    Returns: flow (H,W,2), mask (H,W)
    """
    ids = frame_a.point_ids
    mask = ids >= 0
    flow = np.zeros(ids.shape + (2,))
    if not mask.any():
        return flow, mask
    pid = ids[mask]
    uv_a, _, _ = project_points(frame_a.camera, scene.positions_at(time_a)[pid])
    uv_b, z_b, _ = project_points(frame_b.camera, scene.positions_at(time_b)[pid])
    ok = z_b > 0
    flow[mask] = np.where(ok[:, None], uv_b - uv_a, 0.0)
    mask[mask] = ok
    return flow, mask


def make_dataset(scene: SyntheticScene, trajectory: Trajectory, latent_downsample: int = 8,
                 temporal: int = 4, out_dir: Optional[str | pathlib.Path] = None,
                 frame_dt: float = 1.0, ppm: bool = True) -> Dataset:
    cams: List[Camera] = trajectory.cameras
    k = cams[0].intrinsics
    if k.width % latent_downsample or k.height % latent_downsample:
        raise ValueError(f"image {k.width}x{k.height} not divisible by downsample {latent_downsample}")

    ds = Dataset(seed=scene.seed, downsample=latent_downsample, temporal=temporal,
                 trajectory_kind=trajectory.kind, revisit_pairs=list(trajectory.revisit_pairs))
    renders: List[RenderedFrame] = []
    for i, cam in enumerate(cams):
        t = i * frame_dt
        r = render(scene, cam, t)
        renders.append(r)
        latent, latent_depth = pool_latent(r.image, r.depth, latent_downsample)
        ds.frames.append(Frame(index=i, time=t, camera=cam, image=r.image.astype(np.float32),
                               depth=r.depth, latent=latent, latent_depth=latent_depth,
                               point_ids=r.point_ids))

    for a, b in trajectory.revisit_pairs:
        ds.correspondences.append(Correspondence(a, b, correspondences(renders[a], renders[b])))

    for i in range(len(cams) - 1):
        flow, mask = ground_truth_flow(scene, renders[i], renders[i + 1], i * frame_dt, (i + 1) * frame_dt)
        ds.flows.append(FlowField(i, i + 1, flow, mask))

    if out_dir is not None:
        write_dataset(ds, out_dir, ppm=ppm)
    return ds

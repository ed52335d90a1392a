# cli/main.py
"""
mosaicmem コマンドライン

  simulate  シーン spec → データセット
  lift      データセット → メモリディレクトリ
  retrieve  メモリ + query カメラ → 検索結果ディレクトリ
  mem       delete | duplicate | relocate | stitch
  eval      データセット（+ 検索結果）→ JSON レポート
  preview   検索結果 → モザイク画像（未被覆はマゼンタ）
  attention PRoPE attention マップのダンプ
  ode-demo  解析解のある場で ODE 積分器を確認

終了コード: 0 正常 / 2 入力・spec 不正 / 3 I/O / 4 数値エラー
"""
from __future__ import annotations
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from mosaicmem.model.loader import ModelLoader
from mosaicmem.model.models import Camera
from mosaicmem.geometry.grid import LatentGrid
from mosaicmem.memory.store import MosaicMemory
from mosaicmem.memory.retrieval import (
    RetrievalConfig, retrieve, first_frame_footprint, warp_retrieved_latents,
)
from mosaicmem.warping.warp import assign_alignment, count_alignments
from mosaicmem.manipulation.edit import Selection, delete, duplicate, relocate, stitch
from mosaicmem.metrics.pose import trajectory_errors
from mosaicmem.metrics.image import psnr, ssim
from mosaicmem.metrics.consistency import consistency_score, dynamic_score
from mosaicmem.prope.layout import TokenLayout, unfold_temporal
from mosaicmem.prope.attention import PRoPEConfig, build_blocks, prope_attention
from mosaicmem.flow_ode.integrate import (
    integrate, gaussian_init, zero_field, constant_field, linear_field,
)
from mosaicmem.simulator.scene import build_scene
from mosaicmem.simulator.trajectory import generate_trajectory, make_intrinsics
from mosaicmem.simulator.dataset import make_dataset
from mosaicmem.storage.tensorfile import write_tensor
from mosaicmem.storage.dataset import read_dataset
from mosaicmem.storage.memory_dir import load_memory, save_memory
from mosaicmem.storage.retrieval_dir import load_retrieval, save_retrieval
from .config import merge_config
from .composite import composite, preview_image, write_preview


# ----------------- ヘルパ -----------------

def _floats(text: str, n: int | None = None) -> List[float]:
    vals = [float(x) for x in text.split(",") if x.strip()]
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated numbers: {text}")
    return vals


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _query_camera(args, loader: ModelLoader, temporal: Optional[int] = None) -> tuple[Camera, Optional[int], int]:
    """(camera, dataset frame or None, 既定の latent フレーム j)。temporal はデータセットの s を上書き"""
    if args.camera:
        return loader.load_camera(args.camera), None, 0
    if args.dataset is None or args.frame is None:
        raise ValueError("give --camera JSON or --dataset with --frame")
    ds = read_dataset(args.dataset, loader)
    if not 0 <= args.frame < len(ds.frames):
        raise ValueError(f"frame {args.frame} out of range (0..{len(ds.frames) - 1})")
    grid = LatentGrid(ds.downsample, temporal or ds.temporal)
    return ds.frames[args.frame].camera, args.frame, grid.latent_frame(args.frame)


def _selection(args) -> Selection:
    if args.all:
        return Selection.all()
    if args.ids:
        return Selection.by_ids(_ints(args.ids))
    if args.box:
        v = _floats(args.box, 6)
        return Selection.in_box(v[:3], v[3:])
    raise ValueError("selection required: --ids, --box or --all")


# ----------------- サブコマンド -----------------

def cmd_simulate(args) -> int:
    loader = ModelLoader(validate_schema=True)
    spec = loader.load_simulation_spec(Path(args.spec))
    image = spec.get("image", {})
    intr = make_intrinsics(image.get("width", 256), image.get("height", 256), image.get("fov_deg", 90.0))
    scene = build_scene(spec)
    traj_params = dict(spec["trajectory"])
    kind = traj_params.pop("kind")
    traj = generate_trajectory(kind, traj_params, scene, intr)
    ds = make_dataset(scene, traj,
                      latent_downsample=spec.get("latent_downsample", 8),
                      temporal=spec.get("temporal_compression", 4),
                      out_dir=args.out, frame_dt=spec.get("frame_dt", 1.0), ppm=not args.no_ppm)
    print(f"[INFO] scene: {len(scene)} points, seed={scene.seed}")
    print(f"[INFO] trajectory: {kind}, {len(traj)} frames, {len(traj.revisit_pairs)} revisit pairs")
    if args.plot:
        from mosaicmem.simulator.plot import plot_trajectory
        plot_trajectory(scene, traj, args.plot)
        print(f"[OK] plot → {args.plot}")
    print(f"[OK] dataset ({len(ds.frames)} frames) → {Path(args.out).resolve()}")
    return 0


def cmd_lift(args) -> int:
    cfg = merge_config(args)
    ds = read_dataset(args.dataset)
    grid = LatentGrid(ds.downsample, cfg.temporal or ds.temporal)
    frames = _ints(args.frames) if args.frames else list(range(len(ds.frames)))
    memory = MosaicMemory()
    for i in frames:
        f = ds.frames[i]
        added = memory.lift_and_insert(f.latent, f.latent_depth, f.camera, grid.latent_frame(f.index),
                                       cfg.patch_size, downsample=ds.downsample)
        print(f"[INFO] frame {i}: {len(added)} patches")
    save_memory(memory, args.out)
    print(f"[OK] memory ({len(memory)} patches, voxel={memory.voxel_size:.4g}) → {Path(args.out).resolve()}"
          if len(memory) else f"[WARN] memory is empty → {Path(args.out).resolve()}")
    return 0


def cmd_retrieve(args) -> int:
    cfg = merge_config(args)
    loader = ModelLoader(validate_schema=True)
    camera, frame, default_time = _query_camera(args, loader, cfg.temporal)
    if args.time is None and frame is None:
        print("[WARN] --camera given without --time; query latent frame j defaults to 0")
    memory = load_memory(args.memory, loader)
    downsample = memory.snapshot()[0].downsample if len(memory) else 8
    time = args.time if args.time is not None else default_time

    rcfg = RetrievalConfig(mode=cfg.mode, stride=cfg.stride, occlusion_threshold=cfg.occlusion_threshold,
                           depth_tolerance=cfg.depth_tolerance, max_patches=cfg.max_patches)
    skip = first_frame_footprint(memory, camera, 0, downsample) if args.skip_first_frame else None
    found = retrieve(memory, camera, time, rcfg, skip_region=skip)
    aligned = warp_retrieved_latents(memory, found, camera)
    alignment = assign_alignment([r.patch_id for r in found], cfg.alignment, cfg.mix_ratio, cfg.seed)
    settings = {"mode": cfg.mode, "stride": cfg.stride, "max_patches": cfg.max_patches,
                "occlusion_threshold": cfg.occlusion_threshold, "depth_tolerance": cfg.depth_tolerance,
                "skip_first_frame": bool(args.skip_first_frame), "alignment": cfg.alignment,
                "mix_ratio": cfg.mix_ratio, "seed": cfg.seed, "query_frame": frame, "s": cfg.temporal}
    save_retrieval(args.out, camera, time, found, aligned, alignment, downsample, settings, str(args.memory))
    counts = count_alignments(alignment)
    print(f"[INFO] {len(found)} patches retrieved (rope={counts['rope']} latent={counts['latent']} "
          f"both={counts['both']})")
    print(f"[OK] retrieval → {Path(args.out).resolve()}")
    return 0


def cmd_mem(args) -> int:
    loader = ModelLoader(validate_schema=True)
    memory = load_memory(args.memory, loader)
    if args.action == "stitch":
        other = load_memory(args.other, loader)
        result = stitch(memory, other, loader.load_transform(args.transform))
    else:
        sel = _selection(args)
        if args.action == "delete":
            result = delete(memory, sel)
        else:
            xf = loader.load_transform(args.transform)
            result = (duplicate if args.action == "duplicate" else relocate)(memory, sel, xf)
    save_memory(result, args.out)
    print(f"[OK] {args.action}: {len(memory)} → {len(result)} patches → {Path(args.out).resolve()}")
    return 0


def cmd_eval(args) -> int:
    loader = ModelLoader(validate_schema=True)
    ds = read_dataset(args.dataset, loader)
    report = {"rot_err_deg": None, "trans_err": None, "psnr": None, "ssim": None, "lpips": None,
              "dynamic_score": None, "n_regions": 0}

    est = loader.load_cameras(Path(args.est_cameras)) if args.est_cameras else ds.cameras
    if len(ds.frames) >= 2:
        try:
            err = trajectory_errors(ds.cameras, est)
            report["rot_err_deg"], report["trans_err"] = err.rot_err, err.trans_err
        except ValueError as e:
            print(f"[WARN] pose error skipped: {e}")

    frames = {f.index: f.image for f in ds.frames}
    corr = [(c.a, c.b, c.matches) for c in ds.correspondences]
    cons = consistency_score(frames, corr)
    report["psnr"], report["ssim"], report["n_regions"] = cons.psnr, cons.ssim, cons.n_regions
    if ds.flows:
        report["dynamic_score"] = dynamic_score([f.flow for f in ds.flows], [f.mask for f in ds.flows])

    if args.retrieval:
        bundle = load_retrieval(args.retrieval)
        canvas, covered, _ = composite(bundle)
        idx = bundle.settings.get("query_frame")
        if idx is None:
            idx = next((f.index for f in ds.frames if f.camera.allclose(bundle.query_camera)), None)
        if idx is None:
            print("[WARN] query camera matches no dataset frame; retrieval metrics skipped")
        else:
            frame = ds.frames[idx]
            # 背景を含む latent セルは比較しない
            mask = covered & np.isfinite(frame.latent_depth)
            report["retrieval_coverage"] = float(covered.mean())
            if mask.any():
                target = frame.latent.astype(np.float64)
                report["retrieval_psnr"] = psnr(canvas, target, mask)
                try:
                    report["retrieval_ssim"] = ssim(canvas, target, mask)
                except ValueError as e:
                    print(f"[WARN] retrieval SSIM skipped: {e}")

    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"[OK] report → {Path(args.out).resolve()}")
    else:
        print(text)
    return 0


def cmd_preview(args) -> int:
    cfg = merge_config(args)
    bundle = load_retrieval(args.retrieval)
    canvas, covered, _ = composite(bundle)
    write_preview(args.out, preview_image(canvas, covered, cfg.upscale))
    print(f"[INFO] {len(bundle.records)} patches, coverage {covered.mean():.1%}")
    print(f"[OK] preview → {Path(args.out).resolve()}")
    return 0


def cmd_attention(args) -> int:
    cfg = merge_config(args)
    ds = read_dataset(args.dataset)
    s = cfg.temporal or ds.temporal
    pack = unfold_temporal(ds.cameras, s)
    h, w = ds.frames[0].latent.shape[:2]
    layout = TokenLayout(pack.latent_frames, h, w, s)
    config = PRoPEConfig(cfg.head_dim, temporal_compression=s)
    blocks = build_blocks(layout, pack, config)

    latents = sorted({ds.frames[f].index // s for f in _ints(args.frames)})
    tokens = np.concatenate([np.arange(l * h * w, (l + 1) * h * w) for l in latents])
    feats = np.concatenate([ds.frames[min(l * s, len(ds.frames) - 1)].latent.reshape(h * w, -1)
                            for l in latents]).astype(np.float64)
    rng = np.random.default_rng(cfg.seed)
    proj = rng.standard_normal((cfg.heads, feats.shape[1], cfg.head_dim)) / np.sqrt(feats.shape[1])
    x = np.einsum("nc,hcd->hnd", feats, proj)
    sub = blocks.take(tokens)
    _, weights = prope_attention(x, x, x, sub, return_weights=True)
    write_tensor(args.out, weights.astype(np.float64))
    print(f"[INFO] tokens={len(tokens)} heads={cfg.heads} head_dim={cfg.head_dim} "
          f"s={s} latent_frames={pack.latent_frames}")
    print(f"[OK] attention map {weights.shape} → {Path(args.out).resolve()}")
    return 0


def cmd_ode_demo(args) -> int:
    x0 = gaussian_init((args.dim,), args.seed)
    if args.field == "zero":
        field, exact = zero_field, x0
    elif args.field == "constant":
        field, exact = constant_field(args.value), x0 + args.value
    else:
        field, exact = linear_field, np.e * x0
    x1 = integrate(field, x0, args.steps, args.method)
    err = float(np.max(np.abs(x1 - exact)))
    print(f"[INFO] field={args.field} method={args.method} steps={args.steps}")
    print(f"[INFO] x1[:4]={np.array2string(x1[:4], precision=6)}")
    print(f"[OK] max abs error vs analytic: {err:.3e}")
    return 0


# ----------------- パーサ -----------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mosaicmem", description="Mosaic Memory toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="scene spec → dataset")
    sp.add_argument("spec")
    sp.add_argument("out")
    sp.add_argument("--plot", help="trajectory plot (PNG)")
    sp.add_argument("--no-ppm", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("lift", help="dataset → memory directory")
    sp.add_argument("dataset")
    sp.add_argument("out")
    sp.add_argument("--patch-size", dest="patch_size", type=int)
    sp.add_argument("--frames", help="comma-separated frame indices (default: all)")
    sp.add_argument("--s", dest="temporal", type=int, help="temporal compression (default: dataset)")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_lift)

    sp = sub.add_parser("retrieve", help="memory + query camera → retrieval directory")
    sp.add_argument("memory")
    sp.add_argument("out")
    sp.add_argument("--camera", help="camera JSON file or inline JSON")
    sp.add_argument("--dataset", help="take the query camera from a dataset frame")
    sp.add_argument("--frame", type=int)
    sp.add_argument("--time", type=int, help="query latent frame index j")
    sp.add_argument("--s", dest="temporal", type=int, help="temporal compression (default: dataset)")
    sp.add_argument("--mode", choices=["dense", "sparse"])
    sp.add_argument("--stride", type=int)
    sp.add_argument("--max-patches", dest="max_patches", type=int)
    sp.add_argument("--occlusion-threshold", dest="occlusion_threshold", type=float)
    sp.add_argument("--depth-tolerance", dest="depth_tolerance", type=float)
    sp.add_argument("--skip-first-frame", dest="skip_first_frame", action="store_true")
    sp.add_argument("--alignment", choices=["mix", "rope", "latent", "both"])
    sp.add_argument("--mix-ratio", dest="mix_ratio", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_retrieve)

    sp = sub.add_parser("mem", help="edit a memory directory")
    sp.add_argument("action", choices=["delete", "duplicate", "relocate", "stitch"])
    sp.add_argument("memory")
    sp.add_argument("out")
    sp.add_argument("--other", help="second memory (stitch)")
    sp.add_argument("--transform", help='JSON file or inline {"R":[9],"t":[3],"s":1}')
    sp.add_argument("--ids")
    sp.add_argument("--box", help="x0,y0,z0,x1,y1,z1")
    sp.add_argument("--all", action="store_true")
    sp.set_defaults(func=cmd_mem)

    sp = sub.add_parser("eval", help="metrics report")
    sp.add_argument("dataset")
    sp.add_argument("retrieval", nargs="?")
    sp.add_argument("--est-cameras", dest="est_cameras", help="estimated cameras (JSON list)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("preview", help="composite retrieved patches")
    sp.add_argument("retrieval")
    sp.add_argument("out")
    sp.add_argument("--upscale", type=int)
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_preview)

    sp = sub.add_parser("attention", help="dump a PRoPE attention map")
    sp.add_argument("dataset")
    sp.add_argument("out")
    sp.add_argument("--frames", default="0")
    sp.add_argument("--head-dim", dest="head_dim", type=int)
    sp.add_argument("--heads", type=int)
    sp.add_argument("--s", dest="temporal", type=int, help="temporal compression (default: dataset)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_attention)

    sp = sub.add_parser("ode-demo", help="integrate an analytic field")
    sp.add_argument("--field", choices=["zero", "constant", "linear"], default="linear")
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--method", choices=["euler", "heun"], default="heun")
    sp.add_argument("--value", type=float, default=1.0)
    sp.add_argument("--dim", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_ode_demo)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (np.linalg.LinAlgError, ArithmeticError) as e:
        print(f"[ERR] numeric failure: {e}", file=sys.stderr)
        return 4
    except (ValueError, KeyError) as e:
        print(f"[ERR] invalid input: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"[ERR] I/O: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())

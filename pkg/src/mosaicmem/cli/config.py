# cli/config.py
from __future__ import annotations
from dataclasses import dataclass, fields
from pathlib import Path
import json


@dataclass
class RunConfig:
    """CLI の既定値。--config の JSON が既定を上書きし、明示したフラグがさらに上書きする。"""
    patch_size: int = 2
    mode: str = "dense"
    stride: int = 1
    max_patches: int | None = None
    occlusion_threshold: float = 0.25
    depth_tolerance: float = 0.01
    alignment: str = "mix"
    mix_ratio: float = 0.5
    seed: int = 0
    head_dim: int = 16
    heads: int = 1
    upscale: int = 1
    temporal: int | None = None      # --s。None ならデータセットの値

    def __post_init__(self):
        if self.temporal is not None and self.temporal < 1:
            raise ValueError(f"--s must be >= 1: {self.temporal}")


def load_json(path: str | None) -> dict:
    if not path: return {}
    p = Path(path)
    if not p.exists(): raise FileNotFoundError(path)
    with p.open("r", encoding="utf-8") as f: return json.load(f)


def merge_config(args) -> RunConfig:
    cfg_dict = load_json(getattr(args, "config", None))
    names = {f.name for f in fields(RunConfig)}
    unknown = set(cfg_dict) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    # JSONをデフォルトに、CLIで上書き
    for k, v in vars(args).items():
        if k in names and v is not None:
            cfg_dict[k] = v
    return RunConfig(**cfg_dict)

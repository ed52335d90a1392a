from __future__ import annotations
import pathlib, json, warnings
from typing import Any, List, Mapping

import numpy as np

from .models import Intrinsics, Pose, Camera, RigidTransform

try:
    from jsonschema import validate, ValidationError  # optional dependency
    _HAS_JSONSCHEMA = True
except Exception:
    _HAS_JSONSCHEMA = False


class ModelLoader:
    """JSON（ファイル or 辞書）を読み込んでモデル化する共通ローダ"""

    def __init__(self, validate_schema: bool = True, schema_dir: str | pathlib.Path | None = None):
        self.validate_schema = validate_schema
        # デフォルト: このパッケージの schemas ディレクトリ
        if schema_dir is None:
            self.schema_dir = pathlib.Path(__file__).parent.parent / "schemas"
        else:
            self.schema_dir = pathlib.Path(schema_dir)

    def _load_json(self, path: str | pathlib.Path) -> Any:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def _resolve(self, source: Any) -> Any:
        """パス / JSON文字列 / 読み込み済みオブジェクトのどれでも受け付ける"""
        if isinstance(source, pathlib.Path):
            return self._load_json(source)
        if isinstance(source, str):
            text = source.strip()
            if text.startswith("{") or text.startswith("["):
                return json.loads(text)
            return self._load_json(source)
        return source

    def _validate(self, instance: Any, schema_name: str) -> None:
        if self.validate_schema and _HAS_JSONSCHEMA:
            schema = self._load_json(self.schema_dir / schema_name)
            try:
                validate(instance=instance, schema=schema)
            except ValidationError as e:
                raise ValueError(f"{schema_name}: {e.message}") from e

    # --- 公開API ------------------------------------------------------

    def load_camera(self, source: Any) -> Camera:
        """{fx,fy,cx,cy,width,height,R:[9],t:[3]} → Camera（R は row-major, world→camera）"""
        data = self._resolve(source)
        self._validate(data, "camera.schema.json")
        return camera_from_dict(data)

    def load_cameras(self, items: Any) -> List[Camera]:
        data = self._resolve(items)
        return [self.load_camera(c) for c in data]

    def load_transform(self, source: Any) -> RigidTransform:
        """{R:[9], t:[3], s} → RigidTransform"""
        data = self._resolve(source)
        self._validate(data, "transform.schema.json")
        return RigidTransform(
            np.array(data["R"], dtype=np.float64).reshape(3, 3),
            np.array(data["t"], dtype=np.float64),
            float(data.get("s", 1.0)),
        )

    def load_simulation_spec(self, source: Any) -> Mapping[str, Any]:
        """simulate 用 spec（scene + trajectory + 画像設定）"""
        data = self._resolve(source)
        self._validate(data, "simulation_spec.schema.json")
        for key in data.keys() - {"seed", "image", "primitives", "trajectory",
                                   "latent_downsample", "temporal_compression", "frame_dt"}:
            warnings.warn(f"Unknown key '{key}' in simulation spec")
        return data

    def load_dataset_manifest(self, path: str | pathlib.Path) -> Mapping[str, Any]:
        data = self._load_json(path)
        self._validate(data, "dataset_manifest.schema.json")
        return data

    def load_memory_manifest(self, path: str | pathlib.Path) -> Mapping[str, Any]:
        data = self._load_json(path)
        self._validate(data, "memory_manifest.schema.json")
        return data


# ----------------- ヘルパ -----------------

def camera_from_dict(data: Mapping[str, Any]) -> Camera:
    try:
        intr = Intrinsics(
            fx=float(data["fx"]), fy=float(data["fy"]),
            cx=float(data["cx"]), cy=float(data["cy"]),
            width=int(data["width"]), height=int(data["height"]),
        )
        rot = np.array(data["R"], dtype=np.float64).reshape(3, 3)
        trans = np.array(data["t"], dtype=np.float64).reshape(3)
    except (KeyError, TypeError) as e:
        raise ValueError(f"invalid camera JSON: {e}") from e
    return Camera(intr, Pose(rot, trans))


def camera_to_dict(camera: Camera) -> dict:
    k = camera.intrinsics
    return {
        "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
        "width": k.width, "height": k.height,
        "R": [float(x) for x in camera.pose.rotation.reshape(-1)],
        "t": [float(x) for x in camera.pose.translation],
    }


def transform_to_dict(xf: RigidTransform) -> dict:
    return {
        "R": [float(x) for x in xf.rotation.reshape(-1)],
        "t": [float(x) for x in xf.translation],
        "s": xf.scale,
    }

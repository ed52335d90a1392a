# simulator/scene.py
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np

_AXES = {"x": 0, "y": 1, "z": 2}

# sine 色場の方向（チャネルごと、world 座標）
_SINE_DIRS = np.array([[1.0, 0.3, 0.2],
                       [0.2, 1.0, 0.4],
                       [0.5, -0.4, 1.0]])


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """色付き点群。velocities は点ごとの等速移動（静的シーンは 0）。"""
    points: np.ndarray
    colors: np.ndarray
    radii: np.ndarray
    seed: int = 0
    velocities: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        cols = np.clip(np.array(self.colors, dtype=np.float64).reshape(-1, 3), 0.0, 1.0)
        rad = np.array(self.radii, dtype=np.float64).reshape(-1)
        if not (len(pts) == len(cols) == len(rad)):
            raise ValueError("points/colors/radii length mismatch")
        if np.any(rad <= 0):
            raise ValueError("point radii must be positive")
        vel = np.zeros_like(pts) if self.velocities is None else np.array(self.velocities, dtype=np.float64).reshape(-1, 3)
        if len(vel) != len(pts):
            raise ValueError("velocities length mismatch")
        for name, arr in (("points", pts), ("colors", cols), ("radii", rad), ("velocities", vel)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_static(self) -> bool:
        return not np.any(self.velocities)

    def positions_at(self, time: float = 0.0) -> np.ndarray:
        return self.points + self.velocities * float(time)

    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0) if len(self.points) else np.zeros(3)


class SceneBuilder:
    """
    プリミティブを順に積み上げてシーンを作る。

        scene = SceneBuilder(seed=3).add_plane(...).add_cloud(...).build()
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self._phases = self.rng.uniform(0.0, 2 * np.pi, size=3)
        self._points: List[np.ndarray] = []
        self._colors: List[np.ndarray] = []
        self._radii: List[np.ndarray] = []
        self._vel: List[np.ndarray] = []

    # ---- 色 ---------------------------------------------------------------
    def _color(self, pts: np.ndarray, color: Any, frequency: float) -> np.ndarray:
        if isinstance(color, str):
            if color == "random":
                return self.rng.uniform(0.0, 1.0, size=(len(pts), 3))
            if color == "sine":
                arg = 2 * np.pi * frequency * (pts @ _SINE_DIRS.T) + self._phases
                return 0.5 + 0.35 * np.sin(arg)
            raise ValueError(f"unknown color mode: {color}")
        rgb = np.asarray(color, dtype=np.float64).reshape(3)
        return np.tile(rgb, (len(pts), 1))

    def _push(self, pts, color, frequency, radius, velocity) -> "SceneBuilder":
        self._points.append(pts)
        self._colors.append(self._color(pts, color, frequency))
        self._radii.append(np.full(len(pts), float(radius)))
        v = np.zeros(3) if velocity is None else np.asarray(velocity, dtype=np.float64).reshape(3)
        self._vel.append(np.tile(v, (len(pts), 1)))
        return self

    # ---- プリミティブ -----------------------------------------------------
    def add_plane(self, center: Sequence[float], size: Sequence[float] = (1.0, 1.0),
                  resolution: Sequence[int] = (10, 10), normal_axis: str = "z",
                  color: Any = "sine", frequency: float = 0.25, radius: float | None = None,
                  velocity: Sequence[float] | None = None) -> "SceneBuilder":
        """セル中心に点を置く平面。radius 既定は点間隔の 0.75 倍。"""
        axis = _AXES[normal_axis]
        a, b = [i for i in range(3) if i != axis]
        nx, ny = int(resolution[0]), int(resolution[1])
        sx, sy = float(size[0]), float(size[1])
        c = np.asarray(center, dtype=np.float64)
        ga = c[a] - sx / 2 + (np.arange(nx) + 0.5) * sx / nx
        gb = c[b] - sy / 2 + (np.arange(ny) + 0.5) * sy / ny
        A, B = np.meshgrid(ga, gb, indexing="xy")
        pts = np.zeros((A.size, 3))
        pts[:, a] = A.reshape(-1)
        pts[:, b] = B.reshape(-1)
        pts[:, axis] = c[axis]
        if radius is None:
            radius = 0.75 * max(sx / nx, sy / ny)
        return self._push(pts, color, frequency, radius, velocity)

    def add_box(self, center: Sequence[float], size: Sequence[float] = (1.0, 1.0, 1.0),
                resolution: Sequence[int] = (8, 8), color: Any = "sine", frequency: float = 0.25,
                radius: float | None = None, velocity: Sequence[float] | None = None) -> "SceneBuilder":
        """箱の 6 面に平面グリッドを貼る"""
        c = np.asarray(center, dtype=np.float64)
        s = np.asarray(size, dtype=np.float64).reshape(3)
        faces = []
        for axis in range(3):
            a, b = [i for i in range(3) if i != axis]
            for sign in (-1.0, 1.0):
                fc = c.copy()
                fc[axis] += sign * s[axis] / 2
                sub = SceneBuilder(self.seed)
                sub.add_plane(fc, (s[a], s[b]), resolution, "xyz"[axis], color=(0, 0, 0), radius=1.0)
                faces.append(sub._points[0])
        pts = np.concatenate(faces)
        if radius is None:
            radius = 0.75 * float(max(s[0], s[1], s[2])) / max(resolution)
        return self._push(pts, color, frequency, radius, velocity)

    def add_cloud(self, center: Sequence[float], size: Sequence[float] = (1.0, 1.0, 1.0),
                  count: int = 100, color: Any = "random", frequency: float = 0.25,
                  radius: float | None = None, velocity: Sequence[float] | None = None) -> "SceneBuilder":
        c = np.asarray(center, dtype=np.float64)
        s = np.asarray(size, dtype=np.float64).reshape(3)
        pts = c + (self.rng.uniform(0.0, 1.0, size=(int(count), 3)) - 0.5) * s
        if radius is None:
            radius = 0.05 * float(s.mean())
        return self._push(pts, color, frequency, radius, velocity)

    def add(self, primitive: Mapping[str, Any]) -> "SceneBuilder":
        """JSON のプリミティブ記述を 1 つ追加"""
        kind = primitive["type"]
        opts = {k: v for k, v in primitive.items() if k != "type"}
        makers = {"plane": self.add_plane, "box": self.add_box, "cloud": self.add_cloud}
        if kind not in makers:
            raise ValueError(f"unknown primitive type: {kind}")
        try:
            return makers[kind](**opts)
        except TypeError as e:
            raise ValueError(f"invalid {kind} primitive: {e}") from e

    def build(self) -> SyntheticScene:
        if not self._points:
            return SyntheticScene(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), self.seed)
        return SyntheticScene(
            points=np.concatenate(self._points),
            colors=np.concatenate(self._colors),
            radii=np.concatenate(self._radii),
            seed=self.seed,
            velocities=np.concatenate(self._vel),
        )


def build_scene(spec: Mapping[str, Any] | Sequence[Mapping[str, Any]], seed: int | None = None) -> SyntheticScene:
    """
    spec は {"seed", "primitives": [...]} か、プリミティブのリスト。
    seed 引数が与えられればそちらを優先。
    """
    if isinstance(spec, Mapping):
        prims = spec.get("primitives", [])
        seed = spec.get("seed", 0) if seed is None else seed
    else:
        prims = list(spec)
        seed = 0 if seed is None else seed
    builder = SceneBuilder(seed)
    for prim in prims:
        builder.add(prim)
    return builder.build()


# ----------------- プリセット -----------------

def textured_wall(distance: float = 6.0, width: float = 8.0, height: float = 8.0,
                  resolution: int = 400, frequency: float = 0.15, seed: int = 0) -> SyntheticScene:
    """z=distance の正面の壁。sine 色場で滑らかに変化する。"""
    return (SceneBuilder(seed)
            .add_plane((0.0, 0.0, distance), (width, height), (resolution, resolution), "z",
                       color="sine", frequency=frequency)
            .build())


def scene_preset(name: str, seed: int = 0) -> SyntheticScene:
    presets: Dict[str, Any] = {
        "wall": lambda: textured_wall(seed=seed),
        "room": lambda: (SceneBuilder(seed)
                         .add_plane((0.0, 0.0, 6.0), (12.0, 8.0), (240, 160), "z")
                         .add_plane((0.0, 2.0, 2.0), (12.0, 8.0), (240, 160), "y")
                         .add_box((1.0, 1.0, 3.5), (1.0, 1.0, 1.0), (20, 20))
                         .build()),
        "moving": lambda: (SceneBuilder(seed)
                           .add_plane((0.0, 0.0, 6.0), (8.0, 8.0), (200, 200), "z")
                           .add_cloud((0.0, 0.0, 4.0), (0.6, 0.6, 0.05), 400, color=(1.0, 0.2, 0.2),
                                      radius=0.06, velocity=(0.2, 0.0, 0.0))
                           .build()),
    }
    if name not in presets:
        raise ValueError(f"unknown scene preset: {name}")
    return presets[name]()

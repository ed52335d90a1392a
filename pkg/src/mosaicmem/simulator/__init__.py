from .scene import SyntheticScene, SceneBuilder, build_scene, textured_wall, scene_preset
from .render import RenderedFrame, render, pool_latent
from .trajectory import (
    Trajectory,
    make_intrinsics,
    frustum_overlap,
    generate_trajectory,
    revisit_frequency,
)
from .dataset import correspondences, ground_truth_flow, make_dataset

__all__ = [
    "SyntheticScene",
    "SceneBuilder",
    "build_scene",
    "textured_wall",
    "scene_preset",
    "RenderedFrame",
    "render",
    "pool_latent",
    "Trajectory",
    "make_intrinsics",
    "frustum_overlap",
    "generate_trajectory",
    "revisit_frequency",
    "correspondences",
    "ground_truth_flow",
    "make_dataset",
]

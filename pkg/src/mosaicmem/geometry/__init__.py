from .camera import (
    to_camera_frame,
    project_points,
    back_project_pixels,
    reproject_pixels,
    project,
    back_project,
    reproject,
    relative_projection,
    look_at,
)
from .grid import LatentGrid

__all__ = [
    "to_camera_frame",
    "project_points",
    "back_project_pixels",
    "reproject_pixels",
    "project",
    "back_project",
    "reproject",
    "relative_projection",
    "look_at",
    "LatentGrid",
]

from .models import Intrinsics, Pose, Camera, ProjectionMatrix, PixelCoord, RigidTransform
from .loader import ModelLoader, camera_from_dict, camera_to_dict, transform_to_dict

__all__ = [
    "Intrinsics", "Pose", "Camera", "ProjectionMatrix", "PixelCoord", "RigidTransform",
    "ModelLoader", "camera_from_dict", "camera_to_dict", "transform_to_dict",
]

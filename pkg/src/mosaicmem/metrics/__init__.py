from .pose import PoseError, rot_err, trans_err, path_length, trajectory_errors
from .image import psnr, ssim, ssim_map, gaussian_window, PSNR_CAP
from .consistency import (
    ConsistencyReport,
    RegionScore,
    consistency_score,
    dynamic_score,
    warp_by_correspondence,
)

__all__ = [
    "PoseError",
    "rot_err",
    "trans_err",
    "path_length",
    "trajectory_errors",
    "psnr",
    "ssim",
    "ssim_map",
    "gaussian_window",
    "PSNR_CAP",
    "ConsistencyReport",
    "RegionScore",
    "consistency_score",
    "dynamic_score",
    "warp_by_correspondence",
]

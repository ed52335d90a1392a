from .patch import MemoryPatch, lift_frame
from .index import VoxelIndex, estimate_voxel_size
from .store import MosaicMemory
from .retrieval import (
    RetrievalConfig,
    RetrievedPatch,
    candidate_patches,
    first_frame_footprint,
    retrieve,
    warp_retrieved_latents,
)
from .session import SegmentReport, rollout, segment_bounds
from .analysis import index_stats

__all__ = [
    "MemoryPatch",
    "lift_frame",
    "VoxelIndex",
    "estimate_voxel_size",
    "MosaicMemory",
    "RetrievalConfig",
    "RetrievedPatch",
    "candidate_patches",
    "first_frame_footprint",
    "retrieve",
    "warp_retrieved_latents",
    "SegmentReport",
    "rollout",
    "segment_bounds",
    "index_stats",
]

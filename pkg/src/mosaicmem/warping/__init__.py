from .rope import RopeCoord, RopePhaseTable, rope_phases, apply_rope
from .warp import TokenWarp, warp_rope_coords, assign_alignment, count_alignments
from .latent import WarpedLatent, AlignedLatent, warp_latent, build_source_plane, align_to_query

__all__ = [
    "RopeCoord",
    "RopePhaseTable",
    "rope_phases",
    "apply_rope",
    "TokenWarp",
    "warp_rope_coords",
    "assign_alignment",
    "count_alignments",
    "WarpedLatent",
    "AlignedLatent",
    "warp_latent",
    "build_source_plane",
    "align_to_query",
]

from .layout import CameraPack, TokenLayout, unfold_temporal
from .attention import (
    PRoPEConfig,
    Blocks,
    build_block,
    build_blocks,
    conditioning_blocks,
    apply_blocks,
    prope_attention,
    vanilla_attention,
    dense_matrix,
)

__all__ = [
    "CameraPack",
    "TokenLayout",
    "unfold_temporal",
    "PRoPEConfig",
    "Blocks",
    "build_block",
    "build_blocks",
    "conditioning_blocks",
    "apply_blocks",
    "prope_attention",
    "vanilla_attention",
    "dense_matrix",
]

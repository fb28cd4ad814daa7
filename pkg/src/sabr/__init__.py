"""
SABR Module for the Recurrent Priming Codec

Spatially adaptive bit-rate allocation over 16x16 tiles.
"""

from .allocation import (
    HeightMap,
    clamp_bounds,
    tile_error,
    tile_error_curves,
    allocate,
    search_allocation,
    apply_mask,
    kept_stacks,
    sabr_bpp,
    mean_tile_error,
)

__all__ = [
    'HeightMap',
    'clamp_bounds',
    'tile_error',
    'tile_error_curves',
    'allocate',
    'search_allocation',
    'apply_mask',
    'kept_stacks',
    'sabr_bpp',
    'mean_tile_error',
]

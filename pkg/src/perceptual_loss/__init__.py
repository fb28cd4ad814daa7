"""
Perceptual Loss Module for the Recurrent Priming Codec

DSSIM-weighted L1 with a moving-average baseline.
"""

from .dssim_weighting import (
    LossBaseline,
    BlockWeights,
    block_dssim,
    weighted_l1,
    plain_l1,
    update_baseline,
    BLOCK_SIZE,
    BASELINE_DECAY,
)

__all__ = [
    'LossBaseline',
    'BlockWeights',
    'block_dssim',
    'weighted_l1',
    'plain_l1',
    'update_baseline',
    'BLOCK_SIZE',
    'BASELINE_DECAY',
]

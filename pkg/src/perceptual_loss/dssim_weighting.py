"""
DSSIM-Weighted L1 Loss - Recurrent Priming Codec

Each 8x8 block of the L1 reconstruction error is weighted by its structural
dissimilarity relative to a running average:

    w(x, y) = D(x, y) / S_bar,   D = (1 - SSIM) / 2
    L(x, y) = sum over blocks of w * |y - x|

The weight is treated as a constant when differentiating, so the gradient
with respect to the reconstruction is w * sign(y - x).
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np

from src.errors import ShapeError
from src.nn_core import Tape, Variable, record_op

logger = logging.getLogger(__name__)

BLOCK_SIZE = 8
BASELINE_DECAY = 0.99
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0


@dataclass(frozen=True)
class LossBaseline:
    """Moving average S_bar of the mean block dissimilarity."""
    value: Optional[float] = None
    decay: float = BASELINE_DECAY
    updates: int = 0

    @property
    def initialized(self) -> bool:
        return self.value is not None

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "decay": self.decay, "updates": self.updates}


@dataclass
class BlockWeights:
    """Per-block weights D/S_bar, frozen for the gradient."""
    weights: np.ndarray
    dissimilarity: np.ndarray
    baseline: float

    def over_weighted_fraction(self) -> float:
        return float(np.mean(self.weights > 1.0))


def _as_blocks(a: np.ndarray) -> np.ndarray:
    """(..., H, W, C) -> (..., H/8, W/8, 64, C)"""
    *lead, height, width, channels = a.shape
    rows, cols = height // BLOCK_SIZE, width // BLOCK_SIZE
    a = a.reshape(*lead, rows, BLOCK_SIZE, cols, BLOCK_SIZE, channels)
    a = np.moveaxis(a, -4, -3)
    return a.reshape(*lead, rows, cols, BLOCK_SIZE * BLOCK_SIZE, channels)


def block_dssim(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Structural dissimilarity of every non-overlapping 8x8 block.

    SSIM uses one uniform window covering the block (population statistics),
    K1=0.01, K2=0.03, L=1 on the [0, 1] pixel scale, averaged over channels.

    Args:
        x: Image(s) of shape (..., H, W, C) with H and W divisible by 8
        y: Same shape as ``x``

    Returns:
        D = (1 - SSIM) / 2 of shape (..., H/8, W/8), values in [0, 1]
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"block_dssim: shapes {x.shape} and {y.shape} differ")
    if x.ndim < 3 or x.shape[-3] % BLOCK_SIZE or x.shape[-2] % BLOCK_SIZE:
        raise ShapeError(f"block_dssim: spatial size of {x.shape} is not a multiple of {BLOCK_SIZE}")

    bx, by = _as_blocks(x), _as_blocks(y)
    mu_x = bx.mean(axis=-2)
    mu_y = by.mean(axis=-2)
    var_x = bx.var(axis=-2)
    var_y = by.var(axis=-2)
    cov = ((bx - mu_x[..., None, :]) * (by - mu_y[..., None, :])).mean(axis=-2)

    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    ssim = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    )
    return np.clip((1.0 - ssim.mean(axis=-1)) / 2.0, 0.0, 1.0)


def _expand_blocks(grid: np.ndarray) -> np.ndarray:
    """(..., R, C) block grid -> (..., 8R, 8C, 1) pixel weights."""
    pixels = np.repeat(np.repeat(grid, BLOCK_SIZE, axis=-2), BLOCK_SIZE, axis=-1)
    return pixels[..., None]


def weighted_l1(x: np.ndarray, y: Variable, baseline: LossBaseline,
                tape: Optional[Tape] = None, offset: float = 0.0,
                dissimilarity: Optional[np.ndarray] = None) -> Tuple[Variable, BlockWeights]:
    """DSSIM-weighted L1 distance between an original and a reconstruction.

    Args:
        x: Original image(s), (..., H, W, 3)
        y: Reconstruction to differentiate, same shape
        baseline: Current S_bar; must be initialized and non-zero
        tape: Optional tape to record on
        offset: Added to both images before the DSSIM so that normalized
            pixels ([-0.5, 0.5]) are measured on the [0, 1] scale
        dissimilarity: Precomputed block DSSIM grid, if already available

    Returns:
        (scalar loss, frozen block weights)
    """
    x = np.asarray(x)
    if x.shape != y.shape:
        raise ShapeError(f"weighted_l1: shapes {x.shape} and {y.shape} differ")
    if not baseline.initialized or baseline.value == 0:
        raise ValueError(
            "weighted_l1: the dissimilarity baseline is zero; initialize it with "
            "update_baseline() on the first batch before computing the loss"
        )

    if dissimilarity is None:
        dissimilarity = block_dssim(x + offset, y.value + offset)
    weights = dissimilarity / baseline.value
    pixel_w = _expand_blocks(weights).astype(y.dtype)

    diff = y.value - x
    loss = np.asarray((pixel_w * np.abs(diff)).sum(), dtype=y.dtype)
    direction = np.sign(diff) * pixel_w

    def backward(g):
        return (g * direction,)

    out = record_op("weighted_l1", loss, (y,), backward, tape)
    return out, BlockWeights(weights, dissimilarity, float(baseline.value))


def plain_l1(x: np.ndarray, y: Variable, tape: Optional[Tape] = None) -> Variable:
    """Unweighted L1 distance (the w = 1 training baseline)."""
    x = np.asarray(x)
    if x.shape != y.shape:
        raise ShapeError(f"plain_l1: shapes {x.shape} and {y.shape} differ")
    diff = y.value - x
    direction = np.sign(diff)
    loss = np.asarray(np.abs(diff).sum(), dtype=y.dtype)
    return record_op("plain_l1", loss, (y,), lambda g: (g * direction,), tape)


def update_baseline(baseline: LossBaseline, batch_mean_d: float) -> LossBaseline:
    """S_bar' = alpha * S_bar + (1 - alpha) * batch mean D.

    The first update sets S_bar to the batch mean directly.
    """
    if batch_mean_d < 0:
        raise ValueError(f"batch mean dissimilarity must be non-negative, got {batch_mean_d}")
    if not baseline.initialized:
        value = float(batch_mean_d)
    else:
        value = baseline.decay * baseline.value + (1.0 - baseline.decay) * float(batch_mean_d)
    return LossBaseline(value=value, decay=baseline.decay, updates=baseline.updates + 1)

"""
Spatially Adaptive Bit Rates - Recurrent Priming Codec

Post-process that gives every 16x16 tile as many iterations as it needs to
reach a target quality, clamped to 50%-120% of a target iteration count
(rounded up). Iterations a tile does not use are dropped from the stream and
zero-filled at decode time; the per-tile counts travel as a height map.

Example:
```python
curves = tile_error_curves(original, reconstructions)   # (16, rows, cols)
height_map = allocate(curves, target_quality=0.02, target_t=8)
masked = apply_mask(codes, height_map)
```
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple
import logging

import numpy as np

from src.codec import CodeTensor, MAX_ITERATIONS, TILE_SIZE
from src.errors import ShapeError

logger = logging.getLogger(__name__)

SUB_TILE = TILE_SIZE // 2


@dataclass
class HeightMap:
    """Per-tile iteration counts, shape (rows, cols), values in [0, 16]."""
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.uint8)
        if self.counts.ndim != 2:
            raise ShapeError(f"height map must be 2-D, got shape {self.counts.shape}")
        if self.counts.max(initial=0) > MAX_ITERATIONS:
            raise ShapeError(f"height map entries must be at most {MAX_ITERATIONS}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.counts.shape

    def total_iterations(self) -> int:
        return int(self.counts.astype(np.int64).sum())

    def mean_iterations(self) -> float:
        return float(self.counts.mean()) if self.counts.size else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": self.shape[0],
            "cols": self.shape[1],
            "min": int(self.counts.min(initial=0)),
            "max": int(self.counts.max(initial=0)),
            "mean": self.mean_iterations(),
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, HeightMap) and np.array_equal(self.counts, other.counts)


def clamp_bounds(target_t: int) -> Tuple[int, int]:
    """[ceil(0.5 t*), min(16, ceil(1.2 t*))] in integer arithmetic."""
    if not 1 <= target_t <= MAX_ITERATIONS:
        raise ValueError(f"target_t must be in [1, {MAX_ITERATIONS}], got {target_t}")
    low = (target_t + 1) // 2
    high = min(MAX_ITERATIONS, (6 * target_t + 4) // 5)
    return low, high


def tile_error(original: np.ndarray, reconstruction: np.ndarray) -> np.ndarray:
    """Max over the four 8x8 sub-tiles of the mean absolute error.

    Args:
        original: (H, W, 3) with H and W multiples of 16
        reconstruction: Same shape

    Returns:
        (H/16, W/16) error grid
    """
    original = np.asarray(original, dtype=np.float64)
    reconstruction = np.asarray(reconstruction, dtype=np.float64)
    if original.shape != reconstruction.shape:
        raise ShapeError(
            f"tile_error: shapes {original.shape} and {reconstruction.shape} differ"
        )
    height, width = original.shape[:2]
    if height % TILE_SIZE or width % TILE_SIZE:
        raise ShapeError(f"tile_error: {height}x{width} is not a multiple of {TILE_SIZE}")

    err = np.abs(original - reconstruction)
    if err.ndim == 2:
        err = err[..., None]
    sub = err.reshape(height // SUB_TILE, SUB_TILE, width // SUB_TILE, SUB_TILE, -1)
    sub_means = sub.mean(axis=(1, 3, 4))
    quads = sub_means.reshape(height // TILE_SIZE, 2, width // TILE_SIZE, 2)
    return quads.max(axis=(1, 3))


def tile_error_curves(original: np.ndarray, reconstructions: Sequence[np.ndarray]) -> np.ndarray:
    """Stack tile errors for t = 1..T into shape (T, rows, cols)."""
    if len(reconstructions) == 0:
        raise ValueError("tile_error_curves: no reconstructions given")
    return np.stack([tile_error(original, r) for r in reconstructions])


def allocate(curves: np.ndarray, target_quality: float, target_t: int) -> HeightMap:
    """Per-tile iteration allocation.

    Each tile gets the smallest t with e(t) <= target_quality (or the curve
    length if it never gets there), then is clamped into the window of
    :func:`clamp_bounds`.

    Args:
        curves: Tile errors (T, rows, cols); curves[i] belongs to t = i + 1
        target_quality: Error threshold
        target_t: Target (average) iteration count

    Returns:
        HeightMap of shape (rows, cols)
    """
    curves = np.asarray(curves, dtype=np.float64)
    if curves.ndim != 3 or curves.shape[0] == 0 or curves.shape[1] * curves.shape[2] == 0:
        raise ValueError(f"allocate: curves must be a non-empty (T, rows, cols) array, got {curves.shape}")
    low, high = clamp_bounds(target_t)
    allocation = search_allocation(curves, target_quality)
    clamped = np.clip(allocation, low, high)
    logger.debug(
        f"SABR allocation: target_t={target_t}, window=[{low}, {high}], "
        f"mean before clamp {allocation.mean():.2f}, after {clamped.mean():.2f}"
    )
    return HeightMap(clamped)


def search_allocation(curves: np.ndarray, target_quality: float) -> np.ndarray:
    """Unclamped first-t-meeting-quality search."""
    met = curves <= target_quality
    first = np.argmax(met, axis=0) + 1
    return np.where(met.any(axis=0), first, curves.shape[0]).astype(np.int64)


def apply_mask(codes: CodeTensor, height_map: HeightMap) -> CodeTensor:
    """Zero every bit stack (t, r, c) with t >= map[r, c]."""
    if height_map.shape != (codes.rows, codes.cols):
        raise ShapeError(
            f"height map {height_map.shape} does not match code grid {(codes.rows, codes.cols)}"
        )
    keep = np.arange(codes.iterations)[:, None, None] < height_map.counts[None].astype(np.int64)
    return CodeTensor(np.where(keep[..., None], codes.bits, 0))


def kept_stacks(height_map: HeightMap, iterations: int) -> int:
    """Number of bit stacks a map keeps out of ``iterations`` per tile."""
    return int(np.minimum(height_map.counts.astype(np.int64), iterations).sum())


def sabr_bpp(height_map: HeightMap, map_bytes: int, width: Optional[int] = None,
             height: Optional[int] = None) -> float:
    """(kept code bits + 8 * serialized map bytes) / (W * H).

    Image size defaults to the tile grid of the map.
    """
    rows, cols = height_map.shape
    width = cols * TILE_SIZE if width is None else width
    height = rows * TILE_SIZE if height is None else height
    if width * height == 0:
        raise ValueError("sabr_bpp: zero-area image")
    code_bits = 32 * height_map.total_iterations()
    return (code_bits + 8 * map_bytes) / (width * height)


def mean_tile_error(curves: np.ndarray, target_t: int) -> float:
    """Whole-image tile error at ``target_t``; the CLI's default quality target."""
    return float(np.mean(np.asarray(curves)[target_t - 1]))

"""
Quality Metrics - Recurrent Priming Codec

PSNR, Gaussian-window SSIM and MS-SSIM on RGB images in [0, 1], each
computed per channel and averaged over R, G and B, plus the dB transform
-10 log10(1 - Q) used to report SSIM and MS-SSIM.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple
from decimal import Decimal
import logging
import math

import numpy as np
from scipy.ndimage import gaussian_filter

from src.errors import EvaluationDomainError, ShapeError

logger = logging.getLogger(__name__)

K1 = 0.01
K2 = 0.03
DATA_RANGE = 1.0
GAUSSIAN_SIGMA = 1.5
# truncate * sigma + 0.5 rounds to a radius of 5, an 11-tap window
GAUSSIAN_TRUNCATE = 3.5
WINDOW_SIZE = 11
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


class MetricKind(Enum):
    """Quality metrics reported on RD curves."""
    PSNR = "psnr"
    SSIM = "ssim"
    MS_SSIM = "msssim"

    @classmethod
    def parse(cls, name: str) -> "MetricKind":
        key = name.strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown metric '{name}' (expected psnr, ssim or msssim)")


@dataclass
class QualityScore:
    """One metric evaluation."""
    kind: MetricKind
    value: float
    db: float

    def to_dict(self) -> Dict[str, Any]:
        return {"metric": self.kind.value, "value": self.value, "db": self.db}


def _check_pair(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"images have different shapes {x.shape} and {y.shape}")
    if x.ndim == 2:
        x, y = x[..., None], y[..., None]
    if x.ndim != 3:
        raise ShapeError(f"expected (H, W, C) images, got {x.shape}")
    return x, y


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """10 log10(1 / MSE) over all samples; +inf when the images are identical."""
    x, y = _check_pair(x, y)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE ** 2 / mse)


def _filter(a: np.ndarray) -> np.ndarray:
    return gaussian_filter(a, sigma=GAUSSIAN_SIGMA, truncate=GAUSSIAN_TRUNCATE)


def _ssim_maps(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Single-channel SSIM and contrast-structure maps over the valid region."""
    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2
    mu_x = _filter(x)
    mu_y = _filter(y)
    var_x = _filter(x * x) - mu_x * mu_x
    var_y = _filter(y * y) - mu_y * mu_y
    cov = _filter(x * y) - mu_x * mu_y

    cs = (2 * cov + c2) / (var_x + var_y + c2)
    luminance = (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    pad = WINDOW_SIZE // 2
    valid = (slice(pad, -pad), slice(pad, -pad))
    return (luminance * cs)[valid], cs[valid]


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over channels."""
    x, y = _check_pair(x, y)
    if min(x.shape[:2]) < WINDOW_SIZE:
        raise EvaluationDomainError(
            f"SSIM needs images of at least {WINDOW_SIZE}x{WINDOW_SIZE}, got {x.shape[:2]}"
        )
    values = [_ssim_maps(x[..., c], y[..., c])[0].mean() for c in range(x.shape[2])]
    return float(np.mean(values))


def _downsample(a: np.ndarray) -> np.ndarray:
    height, width = (a.shape[0] // 2) * 2, (a.shape[1] // 2) * 2
    a = a[:height, :width]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def ms_ssim_weights(scales: int = 5) -> np.ndarray:
    """Published scale weights, truncated to ``scales`` and normalized to sum to 1."""
    if not 1 <= scales <= len(MS_SSIM_WEIGHTS):
        raise ValueError(f"scales must be in [1, {len(MS_SSIM_WEIGHTS)}], got {scales}")
    weights = np.array(MS_SSIM_WEIGHTS[:scales], dtype=np.float64)
    weights = weights / weights.sum()
    # absorb rounding into the last weight so the sum is exactly 1
    weights[-1] = 1.0 - weights[:-1].sum()
    return weights


def min_ms_ssim_size(scales: int = 5) -> int:
    return WINDOW_SIZE * 2 ** (scales - 1)


def ms_ssim(x: np.ndarray, y: np.ndarray, scales: int = 5) -> float:
    """Multi-scale SSIM with 2x2 mean-pool downsampling.

    Contrast-structure enters at every scale, luminance only at the
    coarsest. Computed per channel and averaged.
    """
    x, y = _check_pair(x, y)
    needed = min_ms_ssim_size(scales)
    if min(x.shape[:2]) < needed:
        suggestion = scales
        while suggestion > 1 and min(x.shape[:2]) < min_ms_ssim_size(suggestion):
            suggestion -= 1
        raise EvaluationDomainError(
            f"MS-SSIM with {scales} scales needs images of at least {needed}x{needed}, "
            f"got {x.shape[0]}x{x.shape[1]}; reduce the number of scales (e.g. --ms-ssim-scales "
            f"{suggestion})"
        )
    weights = ms_ssim_weights(scales)
    values = [_ms_ssim_channel(x[..., c], y[..., c], weights) for c in range(x.shape[2])]
    return float(np.mean(values))


def _ms_ssim_channel(x: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    """Weighted product of per-scale terms for one channel.

    A negative term (anti-correlated structure at that scale) is clamped to
    0 before the fractional power, so the product is 0 instead of NaN.
    """
    result = 1.0
    for level, weight in enumerate(weights):
        ssim_map, cs_map = _ssim_maps(x, y)
        if level == len(weights) - 1:
            term = ssim_map.mean()
        else:
            term = cs_map.mean()
            x, y = _downsample(x), _downsample(y)
        result *= max(float(term), 0.0) ** weight
    return result


def to_db(q: float) -> float:
    """-10 log10(1 - Q); +inf at Q = 1."""
    if q > 1.0:
        raise ValueError(f"quality {q} exceeds 1; the dB transform is undefined")
    if q == 1.0:
        return math.inf
    # 1 - Q in decimal on the shortest repr of Q, so 1 - 0.99 is exactly 0.01
    gap = Decimal(1) - Decimal(repr(float(q)))
    return -10.0 * float(gap.log10())


def evaluate(kind: MetricKind, original: np.ndarray, reconstruction: np.ndarray,
             ms_ssim_scales: int = 5) -> QualityScore:
    """Compute one metric and its dB value."""
    if kind is MetricKind.PSNR:
        value = psnr(original, reconstruction)
        return QualityScore(kind, value, value)
    if kind is MetricKind.SSIM:
        value = ssim(original, reconstruction)
    else:
        value = ms_ssim(original, reconstruction, ms_ssim_scales)
    return QualityScore(kind, value, to_db(value))


def metric_fits(kind: MetricKind, shape: Tuple[int, ...], ms_ssim_scales: int = 5) -> bool:
    """Whether images of ``shape`` are large enough for ``kind``."""
    smallest = min(shape[:2])
    if kind is MetricKind.MS_SSIM:
        return smallest >= min_ms_ssim_size(ms_ssim_scales)
    if kind is MetricKind.SSIM:
        return smallest >= WINDOW_SIZE
    return smallest > 0

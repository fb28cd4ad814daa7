"""
Bjontegaard Delta - Recurrent Priming Codec

BD-rate: fit log10(bpp) as a cubic in quality for both curves, integrate the
difference over the quality range both curves cover (100 uniform samples,
trapezoidal rule) and report the average rate change in percent. Positive
numbers mean the test curve needs less rate than the reference.

BD-quality is the mirror construction: quality as a cubic in log10(bpp),
averaged over the shared log-rate range.
"""

from typing import Dict, Mapping, Optional, Tuple
import logging

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from src.errors import EvaluationDomainError
from .curves import RdCurve, auc, extend_curve, finite_curve

logger = logging.getLogger(__name__)

MIN_POINTS = 4
SAMPLES = 100
DEGREE = 3


class _CenteredCubic:
    """Least-squares cubic with the abscissa centered for conditioning."""

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.center = float(np.mean(x))
        self.coeffs = np.polyfit(x - self.center, y, DEGREE)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.polyval(self.coeffs, np.asarray(x) - self.center)


def _prepare(curve: RdCurve, purpose: str) -> RdCurve:
    curve = finite_curve(curve, purpose)
    if len(curve) < MIN_POINTS:
        raise EvaluationDomainError(
            f"{purpose} needs at least {MIN_POINTS} finite points per curve, "
            f"'{curve.label}' has {len(curve)}"
        )
    if np.any(curve.bpp <= 0):
        raise EvaluationDomainError(f"{purpose} needs strictly positive rates")
    return curve


def _overlap(a: np.ndarray, b: np.ndarray, what: str) -> Tuple[float, float]:
    low = max(a.min(), b.min())
    high = min(a.max(), b.max())
    if not high > low:
        raise EvaluationDomainError(
            f"curves do not overlap in {what}: [{a.min():.4g}, {a.max():.4g}] vs "
            f"[{b.min():.4g}, {b.max():.4g}]"
        )
    return float(low), float(high)


def _mean_difference(f_ref: _CenteredCubic, f_test: _CenteredCubic,
                     low: float, high: float) -> float:
    samples = np.linspace(low, high, SAMPLES)
    area_ref = trapezoid(f_ref(samples), samples)
    area_test = trapezoid(f_test(samples), samples)
    return float((area_test - area_ref) / (high - low))


def bd_rate(reference: RdCurve, test: RdCurve) -> float:
    """Average rate saving of ``test`` over ``reference`` in percent."""
    reference = _prepare(reference, "BD-rate")
    test = _prepare(test, "BD-rate")
    low, high = _overlap(reference.quality, test.quality, "quality")
    f_ref = _CenteredCubic(reference.quality, np.log10(reference.bpp))
    f_test = _CenteredCubic(test.quality, np.log10(test.bpp))
    mean_log_diff = _mean_difference(f_ref, f_test, low, high)
    return -(10.0 ** mean_log_diff - 1.0) * 100.0


def bd_quality(reference: RdCurve, test: RdCurve) -> float:
    """Average quality gain of ``test`` over ``reference`` at equal rate."""
    reference = _prepare(reference, "BD-quality")
    test = _prepare(test, "BD-quality")
    log_ref = np.log10(reference.bpp)
    log_test = np.log10(test.bpp)
    low, high = _overlap(log_ref, log_test, "rate")
    f_ref = _CenteredCubic(log_ref, reference.quality)
    f_test = _CenteredCubic(log_test, test.quality)
    return _mean_difference(f_ref, f_test, low, high)


# =============================================================================
# Model comparison tables
# =============================================================================

def auc_table(curves: Mapping[str, Mapping[str, RdCurve]]) -> pd.DataFrame:
    """AUC per model (rows) and metric (columns).

    Args:
        curves: {model name: {metric name: curve}}
    """
    rows: Dict[str, Dict[str, float]] = {}
    for model, by_metric in curves.items():
        rows[model] = {metric: auc(curve) for metric, curve in by_metric.items()}
    return pd.DataFrame.from_dict(rows, orient="index")


def bd_table(reference: Mapping[str, RdCurve], tests: Mapping[str, Mapping[str, RdCurve]],
             mode: str = "rate", extend_to: Optional[float] = None) -> pd.DataFrame:
    """BD-rate (%) or BD-quality (dB) of every model against one reference.

    Args:
        reference: {metric name: reference curve}
        tests: {model name: {metric name: curve}}
        mode: "rate" or "quality"
        extend_to: Extrapolate reference curves to this bpp before comparing
    """
    if mode not in ("rate", "quality"):
        raise ValueError(f"mode must be 'rate' or 'quality', got {mode!r}")

    measure = bd_rate if mode == "rate" else bd_quality
    rows: Dict[str, Dict[str, float]] = {}
    for model, by_metric in tests.items():
        row = {}
        for metric, curve in by_metric.items():
            if metric not in reference:
                continue
            ref = reference[metric]
            if extend_to is not None:
                ref = extend_curve(ref, extend_to)
            row[metric] = measure(ref, curve)
        rows[model] = row
    return pd.DataFrame.from_dict(rows, orient="index")

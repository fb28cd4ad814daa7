"""
Rate-Distortion Curves - Recurrent Priming Codec

RD point lists with CSV import/export and trapezoidal area under the curve.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Tuple, Union
import logging

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from src.errors import EvaluationDomainError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["bpp", "quality"]


@dataclass
class RdCurve:
    """(bpp, quality) points of one codec and metric, sorted by bpp."""
    bpp: np.ndarray
    quality: np.ndarray
    label: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.bpp = np.asarray(self.bpp, dtype=np.float64).ravel()
        self.quality = np.asarray(self.quality, dtype=np.float64).ravel()
        if self.bpp.shape != self.quality.shape:
            raise ValueError(
                f"RdCurve: {self.bpp.size} rates but {self.quality.size} quality values"
            )
        if np.any(self.bpp < 0) or not np.all(np.isfinite(self.bpp)):
            raise EvaluationDomainError("RdCurve: rates must be finite and non-negative")
        order = np.argsort(self.bpp, kind="stable")
        self.bpp = self.bpp[order]
        self.quality = self.quality[order]
        if np.any(np.diff(self.bpp) <= 0):
            raise EvaluationDomainError("RdCurve: rates must be strictly increasing")

    @classmethod
    def from_points(cls, points: Iterable[Tuple[float, float]], label: str = "") -> "RdCurve":
        pts = list(points)
        return cls([p[0] for p in pts], [p[1] for p in pts], label)

    def __len__(self) -> int:
        return int(self.bpp.size)

    def points(self):
        return list(zip(self.bpp.tolist(), self.quality.tolist()))

    def drop_non_finite(self) -> Tuple["RdCurve", int]:
        """Remove infinite-quality sentinel points.

        Returns:
            (filtered curve, number of points removed)
        """
        keep = np.isfinite(self.quality)
        skipped = int((~keep).sum())
        return RdCurve(self.bpp[keep], self.quality[keep], self.label, dict(self.metadata)), skipped

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bpp": self.bpp, "quality": self.quality}, columns=CSV_COLUMNS)

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "RdCurve":
        frame = pd.read_csv(path)
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise EvaluationDomainError(f"{path}: missing CSV columns {missing}")
        return cls(frame["bpp"].to_numpy(), frame["quality"].to_numpy(), label=Path(path).stem)

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "bpp": self.bpp.tolist(), "quality": self.quality.tolist()}


def finite_curve(curve: RdCurve, purpose: str) -> RdCurve:
    """Drop sentinel points, logging how many were skipped."""
    filtered, skipped = curve.drop_non_finite()
    if skipped:
        logger.warning(f"{purpose}: skipped {skipped} infinite-quality point(s) of '{curve.label}'")
    return filtered


def auc(curve: RdCurve) -> float:
    """Trapezoidal area under quality (dB) over the curve's bpp span."""
    curve = finite_curve(curve, "AUC")
    if len(curve) < 2:
        raise EvaluationDomainError(f"AUC needs at least 2 finite points, got {len(curve)}")
    return float(trapezoid(curve.quality, curve.bpp))


def extend_curve(curve: RdCurve, max_bpp: float) -> RdCurve:
    """Extrapolate a curve to ``max_bpp``.

    The new end point continues the line through the last two points in
    (log10 bpp, quality). Curves already reaching ``max_bpp`` are returned
    unchanged.
    """
    curve = finite_curve(curve, "Curve extension")
    if len(curve) < 2:
        raise EvaluationDomainError("extending a curve needs at least 2 finite points")
    if max_bpp <= curve.bpp[-1]:
        return curve
    if curve.bpp[-2] <= 0:
        raise EvaluationDomainError("extending a curve needs positive rates")
    x0, x1 = np.log10(curve.bpp[-2:])
    y0, y1 = curve.quality[-2:]
    slope = (y1 - y0) / (x1 - x0)
    extra = y1 + slope * (np.log10(max_bpp) - x1)
    logger.info(f"Extended '{curve.label}' from {curve.bpp[-1]:.3f} to {max_bpp:.3f} bpp")
    return RdCurve(np.append(curve.bpp, max_bpp), np.append(curve.quality, extra),
                   curve.label, dict(curve.metadata))

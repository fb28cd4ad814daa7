"""
RD Evaluation Module for the Recurrent Priming Codec

Rate-distortion curves, area under the curve and Bjontegaard deltas.
"""

from .curves import (
    RdCurve,
    auc,
    extend_curve,
    finite_curve,
    CSV_COLUMNS,
)

from .bjontegaard import (
    bd_rate,
    bd_quality,
    auc_table,
    bd_table,
)

from .evaluation import (
    Variant,
    RdPoint,
    evaluate_image,
    rd_points,
    curves_from_points,
    rd_curve,
)

__all__ = [
    # Curves
    'RdCurve',
    'auc',
    'extend_curve',
    'finite_curve',
    'CSV_COLUMNS',
    # Bjontegaard
    'bd_rate',
    'bd_quality',
    'auc_table',
    'bd_table',
    # Evaluation
    'Variant',
    'RdPoint',
    'evaluate_image',
    'rd_points',
    'curves_from_points',
    'rd_curve',
]

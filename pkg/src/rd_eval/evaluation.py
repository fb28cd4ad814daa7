"""
RD Evaluation - Recurrent Priming Codec

Builds RD curves for a trained codec over an image set. Every image is
compressed once at the largest iteration count; the per-iteration
reconstructions give all t = 1..T points.

Variants:
- nominal: bpp = t/8, no container overhead
- entropy: size of the range-coded container
- sabr: range-coded container with a SABR height map (target quality is the
  whole-image tile error at t, target rate t)
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from src.bitstream import measured_bpp, serialize
from src.codec import (
    CodecNetwork, CodeTensor, MAX_ITERATIONS, ProgressiveCodec, crop, denormalize,
    nominal_bpp, normalize, pad_to_tiles,
)
from src.errors import CheckpointError, EvaluationDomainError, UntrainedCheckpointError
from src.metrics import MetricKind, evaluate, metric_fits
from src.sabr import allocate, apply_mask, mean_tile_error, tile_error_curves
from .curves import RdCurve

logger = logging.getLogger(__name__)


class Variant(Enum):
    """Bit accounting used for an RD curve."""
    NOMINAL = "nominal"
    ENTROPY = "entropy"
    SABR = "sabr"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown variant '{name}' (expected nominal, entropy or sabr)")


@dataclass
class RdPoint:
    """One image at one iteration count under one variant."""
    image: int
    variant: Variant
    t: int
    bpp: float
    scores: Dict[MetricKind, float] = field(default_factory=dict)


def _require_trained(network: Optional[CodecNetwork], trained_steps: Optional[int],
                     allow_untrained: bool) -> None:
    if network is None:
        raise CheckpointError("RD evaluation needs a checkpoint; none was loaded")
    if trained_steps == 0:
        if not allow_untrained:
            raise UntrainedCheckpointError(
                "checkpoint has no training steps; pass allow_untrained to evaluate it anyway"
            )
        logger.warning("Evaluating an untrained checkpoint")


def evaluate_image(codec: ProgressiveCodec, image: np.ndarray, index: int,
                   variants: Sequence[Variant], metrics: Sequence[MetricKind],
                   t_max: int = MAX_ITERATIONS, ms_ssim_scales: int = 5) -> List[RdPoint]:
    """All RD points of one [0, 1] RGB image."""
    padded, size = pad_to_tiles(image)
    height, width = padded.shape[:2]
    codes, recons = codec.encode(normalize(padded), t_max)

    def scores(recon: np.ndarray) -> Dict[MetricKind, float]:
        restored = np.clip(crop(denormalize(recon), size), 0.0, 1.0)
        return {m: evaluate(m, image, restored, ms_ssim_scales).db for m in metrics}

    base_scores = [scores(r) for r in recons] if (
        Variant.NOMINAL in variants or Variant.ENTROPY in variants) else []
    curves = tile_error_curves(padded - 0.5, recons) if Variant.SABR in variants else None

    points: List[RdPoint] = []
    for t in range(1, t_max + 1):
        if Variant.NOMINAL in variants:
            points.append(RdPoint(index, Variant.NOMINAL, t, nominal_bpp(t), base_scores[t - 1]))
        if Variant.ENTROPY in variants:
            data = serialize(codes.truncate(t), entropy=True)
            points.append(RdPoint(index, Variant.ENTROPY, t,
                                  measured_bpp(data, width, height), base_scores[t - 1]))
        if Variant.SABR in variants:
            height_map = allocate(curves, mean_tile_error(curves, t), t)
            used = int(height_map.counts.max())
            masked = CodeTensor(apply_mask(codes, height_map).bits[:used])
            data = serialize(masked, height_map, entropy=True)
            recon = codec.decompress(masked)
            points.append(RdPoint(index, Variant.SABR, t,
                                  measured_bpp(data, width, height), scores(recon)))
    return points


def rd_points(network: Optional[CodecNetwork], images: Sequence[np.ndarray],
              variants: Sequence[Variant], metrics: Sequence[MetricKind],
              t_max: int = MAX_ITERATIONS, k_prime: Optional[int] = None,
              k_diffuse: Optional[int] = None, threads: int = 1,
              trained_steps: Optional[int] = None, allow_untrained: bool = False,
              ms_ssim_scales: int = 5) -> pd.DataFrame:
    """Per-image RD points as a DataFrame (image, variant, t, bpp, one column per metric).

    Images are processed in parallel on ``threads`` workers; results keep
    image order so averages are reproducible.
    """
    _require_trained(network, trained_steps, allow_untrained)
    if not images:
        raise EvaluationDomainError("RD evaluation needs at least one image")
    if not 1 <= t_max <= MAX_ITERATIONS:
        raise ValueError(f"t_max must be in [1, {MAX_ITERATIONS}], got {t_max}")

    usable = []
    for metric in metrics:
        if all(metric_fits(metric, img.shape, ms_ssim_scales) for img in images):
            usable.append(metric)
        else:
            logger.warning(f"Skipping {metric.value}: some images are too small for it")
    if not usable:
        raise EvaluationDomainError("no requested metric can be computed on these images")

    codec = ProgressiveCodec(network, k_prime, k_diffuse)
    logger.info(
        f"Evaluating {len(images)} image(s): t=1..{t_max}, variants "
        f"{[v.value for v in variants]}, metrics {[m.value for m in usable]}, {threads} thread(s)"
    )

    def work(item: Tuple[int, np.ndarray]) -> List[RdPoint]:
        index, image = item
        return evaluate_image(codec, image, index, variants, usable, t_max, ms_ssim_scales)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_image = list(pool.map(work, enumerate(images)))

    records = []
    for points in per_image:
        for p in points:
            row = {"image": p.image, "variant": p.variant.value, "t": p.t, "bpp": p.bpp}
            row.update({m.value: q for m, q in p.scores.items()})
            records.append(row)
    return pd.DataFrame.from_records(records)


def _monotone_rates(means: pd.DataFrame, variant: Variant) -> pd.DataFrame:
    """Keep only rows whose mean rate exceeds every earlier one."""
    running = means["bpp"].cummax().shift(1, fill_value=-np.inf)
    keep = means["bpp"] > running
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"{variant.value}: dropped {dropped} point(s) whose rate did not increase with t")
    return means[keep]


def curves_from_points(points: pd.DataFrame) -> Dict[Tuple[Variant, MetricKind], RdCurve]:
    """Average per-image points into one curve per (variant, metric).

    Rates and dB qualities are averaged arithmetically over images at each t.
    """
    curves: Dict[Tuple[Variant, MetricKind], RdCurve] = {}
    metric_columns = [m for m in MetricKind if m.value in points.columns]
    for variant_name, group in points.groupby("variant", sort=False):
        means = group.groupby("t").mean(numeric_only=True).sort_index()
        variant = Variant(variant_name)
        means = _monotone_rates(means, variant)
        for metric in metric_columns:
            label = f"{variant.value}_{metric.value}"
            curves[(variant, metric)] = RdCurve(means["bpp"].to_numpy(),
                                                means[metric.value].to_numpy(), label,
                                                {"t": means.index.to_list()})
    return curves


def rd_curve(network: Optional[CodecNetwork], images: Sequence[np.ndarray],
             variant: Variant = Variant.NOMINAL, metric: MetricKind = MetricKind.MS_SSIM,
             **kwargs) -> RdCurve:
    """Single RD curve for one variant and metric."""
    points = rd_points(network, images, [variant], [metric], **kwargs)
    curves = curves_from_points(points)
    if (variant, metric) not in curves:
        raise EvaluationDomainError(f"no {metric.value} curve could be computed")
    return curves[(variant, metric)]

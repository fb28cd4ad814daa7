"""
Metrics Module for the Recurrent Priming Codec

RGB-domain PSNR, SSIM, MS-SSIM and the dB transform.
"""

from .quality import (
    MetricKind,
    QualityScore,
    psnr,
    ssim,
    ms_ssim,
    ms_ssim_weights,
    min_ms_ssim_size,
    to_db,
    evaluate,
    metric_fits,
    MS_SSIM_WEIGHTS,
)

__all__ = [
    'MetricKind',
    'QualityScore',
    'psnr',
    'ssim',
    'ms_ssim',
    'ms_ssim_weights',
    'min_ms_ssim_size',
    'to_db',
    'evaluate',
    'metric_fits',
    'MS_SSIM_WEIGHTS',
]

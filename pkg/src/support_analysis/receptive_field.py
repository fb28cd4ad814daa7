"""
Empirical Receptive Field - Recurrent Priming Codec

Measures how far one bit stack reaches by perturbation: run the closed
encoder/decoder loop twice on the same strip image, negating the
iteration-0 codes of the center stack in the second run, and take the
horizontal extent of the reconstruction pixels that changed.

The loop runs with continuous codes and an unclamped output so that no
sign flip or saturation hides a dependency. Widths are reported in bit
stacks as ceil(pixel extent / 16).
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional
import logging

import numpy as np

from src.codec import ArchitectureConfig, CodecNetwork, TILE_SIZE, run_iterations
from src.errors import ShapeError
from .spatial_support import max_support_bits

logger = logging.getLogger(__name__)

CHANGE_THRESHOLD = 1e-9
STRIP_MARGIN = 8


@dataclass
class ReceptiveField:
    """Measured support of one stack at one iteration."""
    t: int
    k_prime: int
    k_diffuse: int
    pixel_extent: int
    width_stacks: int
    analytic_bits: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "k_prime": self.k_prime,
            "k_diffuse": self.k_diffuse,
            "pixel_extent": self.pixel_extent,
            "width_stacks": self.width_stacks,
            "analytic_bits": self.analytic_bits,
        }


def create_probe_network(seed: int = 0, bias_scale: float = 0.1) -> CodecNetwork:
    """Small float64 network with random kernels and random biases."""
    rng = np.random.default_rng(seed)
    arch = ArchitectureConfig(encoder_depths=(4, 8, 8, 8), decoder_depths=(8, 8, 8, 8))
    network = CodecNetwork.initialize(arch, rng, dtype=np.float64)
    arrays = network.arrays()
    for name, value in arrays.items():
        if value.ndim == 1:
            arrays[name] = rng.normal(0.0, bias_scale, size=value.shape)
    network.load_arrays(arrays)
    return network


def empirical_receptive_field(t: int, k_prime: int = 0, k_diffuse: int = 0,
                              network: Optional[CodecNetwork] = None,
                              width_stacks: Optional[int] = None,
                              seed: int = 0) -> ReceptiveField:
    """Measure the bit-stack support of the reconstruction after iteration t.

    Args:
        t: Iteration index (0 is the first iteration)
        k_prime: Priming steps of the loop
        k_diffuse: Diffusion steps of the loop
        network: Codec to probe; a random float64 probe network by default
        width_stacks: Strip width in stacks; twice the analytic bound plus a
            margin by default
        seed: Seed of the strip image (and of the default network)

    Returns:
        ReceptiveField with the measured and analytic widths
    """
    if t < 0:
        raise ValueError(f"iteration index must be >= 0, got {t}")
    effective_prime = k_prime + k_diffuse
    analytic = max_support_bits(t, effective_prime, k_diffuse)
    if width_stacks is None:
        width_stacks = 2 * analytic + STRIP_MARGIN
    if width_stacks < 2 * analytic + 1:
        raise ShapeError(
            f"a strip of {width_stacks} stacks cannot hold a support of {analytic} stacks "
            f"on both sides of the probe; use at least {2 * analytic + 1}"
        )
    if network is None:
        network = create_probe_network(seed)

    rng = np.random.default_rng(seed)
    image = rng.uniform(-0.5, 0.5, size=(1, TILE_SIZE, width_stacks * TILE_SIZE, 3))
    center = width_stacks // 2

    def negate_center(iteration: int, codes: np.ndarray) -> np.ndarray:
        if iteration != 0:
            return codes
        flipped = codes.copy()
        flipped[:, :, center, :] *= -1
        return flipped

    common = dict(iterations=t + 1, k_prime=k_prime, k_diffuse=k_diffuse,
                  quantize=False, clamp_output=False)
    base = run_iterations(network, image, **common).reconstructions[t].value
    probed = run_iterations(network, image, code_hook=negate_center, **common).reconstructions[t].value

    changed = np.abs(probed - base).max(axis=(0, 1, 3)) > CHANGE_THRESHOLD
    columns = np.flatnonzero(changed)
    extent = int(columns[-1] - columns[0] + 1) if columns.size else 0
    measured = ReceptiveField(t, k_prime, k_diffuse, extent, -(-extent // TILE_SIZE), analytic)
    logger.info(
        f"Receptive field at t={t} (k_prime={k_prime}, k_diffuse={k_diffuse}): "
        f"{extent} px, {measured.width_stacks} stacks (analytic max {analytic})"
    )
    return measured

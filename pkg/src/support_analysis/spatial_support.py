"""
Spatial Support - Recurrent Priming Codec

Analytic spatial support of the fixed codec layout, in bit stacks (decoder
side) and pixels (encoder side and whole loop).

Encoder layers widen the pixel support by (I - 1) * 2^i each. Decoder GRU
layers widen the bit support along two paths: the input kernel within one
step, and the hidden kernel (reached twice through the reset gate) across
steps. Depth-to-space halves the bit-domain contribution of every later
layer, so supports can be fractional; a fractional value means the real
support is floor or ceil of it depending on the output pixel position.

Example:
```python
max_support_bits(2, 0, 0)   # 18 bit stacks
image_support(0, 3, 0)      # 175 pixels
```
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil
from typing import Any, Dict, Optional
import logging

import pandas as pd

from src.codec import DECODER_KERNELS, ENCODER_KERNELS, TILE_SIZE

logger = logging.getLogger(__name__)

ENCODER_LAYERS = len(ENCODER_KERNELS)           # E0..E3
DECODER_LAYERS = len(DECODER_KERNELS) - 1       # D1..D4 (D0 is 1x1)

# Per-iteration growth of the bit support: ceil(1.5 k + 5.5)
GROWTH_PER_STEP = Fraction(3, 2)
GROWTH_BASE = Fraction(11, 2)


@dataclass(frozen=True)
class SupportQuery:
    """One support question: iteration t with k_p priming and k_d diffusion steps."""
    t: int
    k_prime: int = 0
    k_diffuse: int = 0
    layer: Optional[int] = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"iteration index must be >= 0, got {self.t}")
        if self.k_prime < 0 or self.k_diffuse < 0:
            raise ValueError("priming and diffusion step counts must be non-negative")
        if self.k_diffuse > 0 and self.k_prime != self.k_diffuse:
            raise ValueError(
                f"support formula needs k_prime == k_diffuse when k_diffuse > 0 "
                f"(got k_prime={self.k_prime}, k_diffuse={self.k_diffuse})"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t, "k_prime": self.k_prime, "k_diffuse": self.k_diffuse,
                "layer": self.layer}


def _check_t(t: int) -> None:
    if t < 0:
        raise ValueError(f"iteration index must be >= 0, got {t}")


# =============================================================================
# Layer recurrences
# =============================================================================

def encoder_support(i: int, t: int, k_prime: int = 0, k_diffuse: int = 0) -> int:
    """Pixel support of encoder layer E_i at iteration t.

    S(E_i,t) = (I_i - 1) * 2^i + S(E_{i-1},t), seeded with the support of the
    previous reconstruction (1 pixel before the first iteration).
    """
    if not 0 <= i < ENCODER_LAYERS:
        raise ValueError(f"encoder layer must be in [0, {ENCODER_LAYERS - 1}], got {i}")
    _check_t(t)
    support = 1 if t == 0 else image_support(t - 1, k_prime, k_diffuse)
    for layer in range(i + 1):
        support += (ENCODER_KERNELS[layer][0] - 1) * 2 ** layer
    return support


@lru_cache(maxsize=None)
def _decoder_support(i: int, t: int) -> Fraction:
    if i == 0 or t < 0:
        return Fraction(1)
    k_in, k_hidden, _ = DECODER_KERNELS[i]
    scale = Fraction(1, 2 ** max(i - 1, 0))
    within_step = (max(k_hidden - 1, 0) + k_in - 1) * scale + _decoder_support(i - 1, t)
    across_steps = max(2 * (k_hidden - 1), 0) * scale + _decoder_support(i, t - 1)
    return max(within_step, across_steps)


def decoder_support_bits(i: int, t: int) -> Fraction:
    """Bit-stack support of decoder layer D_i at iteration t, as an exact rational."""
    if not 1 <= i <= DECODER_LAYERS:
        raise ValueError(f"decoder layer must be in [1, {DECODER_LAYERS}], got {i}")
    _check_t(t)
    return _decoder_support(i, t)


# =============================================================================
# Whole-loop support
# =============================================================================

def max_support_bits(t: int, k_prime: int = 0, k_diffuse: int = 0) -> int:
    """ceil(1.5 k_d + 5.5) * t + ceil(1.5 k_p + 5.5) bit stacks."""
    query = SupportQuery(t, k_prime, k_diffuse)
    per_step = ceil(GROWTH_PER_STEP * query.k_diffuse + GROWTH_BASE)
    first = ceil(GROWTH_PER_STEP * query.k_prime + GROWTH_BASE)
    return per_step * query.t + first


def image_support(t: int, k_prime: int = 0, k_diffuse: int = 0) -> int:
    """Pixel support of the reconstruction: 16 * max_support_bits + 15."""
    return TILE_SIZE * max_support_bits(t, k_prime, k_diffuse) + TILE_SIZE - 1


def support_table(t_max: int = 16, k_prime: int = 0, k_diffuse: int = 0) -> pd.DataFrame:
    """Bit and pixel supports for t = 0..t_max, one row per iteration."""
    _check_t(t_max)
    rows = []
    for t in range(t_max + 1):
        bits = max_support_bits(t, k_prime, k_diffuse)
        rows.append({
            "t": t,
            "k_prime": k_prime,
            "k_diffuse": k_diffuse,
            "decoder_bits": float(decoder_support_bits(DECODER_LAYERS, t)),
            "support_bits": bits,
            "support_pixels": TILE_SIZE * bits + TILE_SIZE - 1,
        })
    return pd.DataFrame(rows)

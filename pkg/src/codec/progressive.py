"""
Progressive Codec - Recurrent Priming Codec

Single-image compress/decompress on top of the iteration controller, and
the code tensor that travels between them.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple
import logging

import numpy as np

from src.errors import ShapeError
from .architecture import BINARIZER_DEPTH, MAX_ITERATIONS, TILE_SIZE
from .controller import decode_iterations, run_iterations
from .network import CodecNetwork

logger = logging.getLogger(__name__)


def nominal_bpp(t: int) -> float:
    """Bits per pixel emitted by the binarizer after t iterations (t/8)."""
    if not 0 <= t <= MAX_ITERATIONS:
        raise ValueError(f"t must be in [0, {MAX_ITERATIONS}], got {t}")
    return t * BINARIZER_DEPTH / (TILE_SIZE * TILE_SIZE)


@dataclass
class CodeTensor:
    """Binary codes of one image, shape (iterations, rows, cols, 32).

    Values are +1/-1; 0 marks an absent bit (masked out by SABR).
    """
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int8)
        if self.bits.ndim != 4 or self.bits.shape[-1] != BINARIZER_DEPTH:
            raise ShapeError(f"code tensor must be (t, rows, cols, 32), got {self.bits.shape}")
        if self.bits.shape[0] > MAX_ITERATIONS:
            raise ShapeError(f"code tensor holds {self.bits.shape[0]} iterations")
        if not np.isin(self.bits, (-1, 0, 1)).all():
            raise ShapeError("code values must be -1, 0 or +1")

    @property
    def iterations(self) -> int:
        return self.bits.shape[0]

    @property
    def rows(self) -> int:
        return self.bits.shape[1]

    @property
    def cols(self) -> int:
        return self.bits.shape[2]

    @property
    def image_size(self) -> Tuple[int, int]:
        """(height, width) in pixels."""
        return self.rows * TILE_SIZE, self.cols * TILE_SIZE

    def present_bits(self) -> int:
        return int(np.count_nonzero(self.bits))

    def nominal_bpp(self) -> float:
        return nominal_bpp(self.iterations)

    def truncate(self, t: int) -> "CodeTensor":
        return CodeTensor(self.bits[:t])

    def __eq__(self, other) -> bool:
        return isinstance(other, CodeTensor) and np.array_equal(self.bits, other.bits)


class ProgressiveCodec:
    """
    Compress and decompress single images with a trained network.

    Example:
    ```python
    codec = ProgressiveCodec(network, k_prime=3)
    codes = codec.compress(normalize(image), t=4)
    restored = codec.decompress(codes)
    ```
    """

    def __init__(self, network: CodecNetwork, k_prime: Optional[int] = None,
                 k_diffuse: Optional[int] = None):
        self.network = network
        self.k_prime = network.arch.k_prime if k_prime is None else k_prime
        self.k_diffuse = network.arch.k_diffuse if k_diffuse is None else k_diffuse

    def encode(self, image: np.ndarray, t: int) -> Tuple[CodeTensor, List[np.ndarray]]:
        """Compress and also return the reconstruction after every iteration.

        Args:
            image: Normalized image (H, W, 3) in [-0.5, 0.5]
            t: Iterations, 1..16

        Returns:
            (codes, reconstructions) where reconstructions[i] follows iteration i
        """
        if image.ndim != 3:
            raise ShapeError(f"expected one image (H, W, 3), got {image.shape}")
        trace = run_iterations(self.network, image[None], t, self.k_prime, self.k_diffuse)
        codes = CodeTensor(trace.code_array()[:, 0].astype(np.int8))
        recons = [r.value[0] for r in trace.reconstructions]
        logger.debug(
            f"Compressed {image.shape[0]}x{image.shape[1]} image: t={t}, "
            f"{trace.encoder_steps} encoder passes"
        )
        return codes, recons

    def compress(self, image: np.ndarray, t: int) -> CodeTensor:
        return self.encode(image, t)[0]

    def decode(self, codes: CodeTensor, fill: float = 0.0) -> List[np.ndarray]:
        """Reconstructions after every iteration of ``codes``."""
        recons = decode_iterations(self.network, codes.bits[:, None], self.k_prime,
                                   self.k_diffuse, fill)
        return [r[0] for r in recons]

    def decompress(self, codes: CodeTensor, fill: float = 0.0) -> np.ndarray:
        """Final reconstruction, normalized to [-0.5, 0.5]."""
        if codes.iterations == 0:
            height, width = codes.image_size
            return np.zeros((height, width, 3), dtype=self.network.dtype)
        return self.decode(codes, fill)[-1]

"""
Codec Architecture - Recurrent Priming Codec

Single source of truth for layer depths, kernel sizes and iteration counts.

Encoder: E0 feed-forward conv (3x3, stride 2, tanh), E1..E3 GRU (I=3, H=1,
stride 2), then a 1x1 conv to 32 channels with tanh feeding the binarizer.
Decoder: D0 1x1 feed-forward conv (tanh) from the codes, D1..D4 GRU
(I=3; H=1 for D1/D2, H=3 for D3/D4), each followed by a 2x2 depth-to-space,
then a 1x1 conv to RGB with tanh.
"""

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Tuple
import hashlib
import json

from src.errors import ConfigError

BINARIZER_DEPTH = 32
TILE_SIZE = 16
MAX_ITERATIONS = 16

# (input kernel, hidden kernel, stride); hidden kernel 0 marks a feed-forward layer
ENCODER_KERNELS: Tuple[Tuple[int, int, int], ...] = ((3, 0, 2), (3, 1, 2), (3, 1, 2), (3, 1, 2))
DECODER_KERNELS: Tuple[Tuple[int, int, int], ...] = ((1, 0, 1), (3, 1, 1), (3, 1, 1), (3, 3, 1), (3, 3, 1))


@dataclass
class ArchitectureConfig:
    """Layer depths and recurrence settings of one codec."""
    encoder_depths: Tuple[int, int, int, int] = (64, 256, 256, 256)
    decoder_depths: Tuple[int, int, int, int] = (256, 256, 128, 64)
    binarizer_depth: int = BINARIZER_DEPTH
    max_iterations: int = MAX_ITERATIONS
    k_prime: int = 0
    k_diffuse: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.encoder_depths = tuple(int(d) for d in self.encoder_depths)
        self.decoder_depths = tuple(int(d) for d in self.decoder_depths)
        self.validate()

    def validate(self) -> None:
        if len(self.encoder_depths) != 4 or len(self.decoder_depths) != 4:
            raise ConfigError("architecture needs 4 encoder depths and 4 decoder depths")
        if any(d <= 0 for d in self.encoder_depths + self.decoder_depths):
            raise ConfigError("layer depths must be positive")
        if any(d % 4 for d in self.decoder_depths):
            raise ConfigError(f"decoder depths {self.decoder_depths} must be divisible by 4")
        if self.binarizer_depth != BINARIZER_DEPTH:
            raise ConfigError(f"binarizer depth must be {BINARIZER_DEPTH}")
        if not 1 <= self.max_iterations <= MAX_ITERATIONS:
            raise ConfigError(f"max_iterations must be in [1, {MAX_ITERATIONS}]")
        if self.k_prime < 0 or self.k_diffuse < 0:
            raise ConfigError("k_prime and k_diffuse must be non-negative")

    @property
    def extra_first_steps(self) -> int:
        """Discarded recurrent steps before the first kept iteration."""
        return self.k_prime + self.k_diffuse

    def shape_dict(self) -> Dict[str, Any]:
        """Everything that determines parameter shapes."""
        return {
            "encoder_depths": list(self.encoder_depths),
            "decoder_depths": list(self.decoder_depths),
            "binarizer_depth": self.binarizer_depth,
            "encoder_kernels": [list(k) for k in ENCODER_KERNELS],
            "decoder_kernels": [list(k) for k in DECODER_KERNELS],
        }

    def digest(self) -> str:
        """16 hex characters identifying the parameter layout."""
        canonical = json.dumps(self.shape_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["encoder_depths"] = list(self.encoder_depths)
        data["decoder_depths"] = list(self.decoder_depths)
        data.pop("metadata")
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ArchitectureConfig":
        known = {"encoder_depths", "decoder_depths", "binarizer_depth",
                 "max_iterations", "k_prime", "k_diffuse"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown architecture keys: {sorted(unknown)}")
        return cls(**data)


def create_desk_architecture(k_prime: int = 0, k_diffuse: int = 0) -> ArchitectureConfig:
    """Small depths for laptop-scale training."""
    return ArchitectureConfig(
        encoder_depths=(32, 64, 64, 64),
        decoder_depths=(64, 64, 32, 32),
        k_prime=k_prime,
        k_diffuse=k_diffuse,
    )


def create_full_architecture(k_prime: int = 0, k_diffuse: int = 0) -> ArchitectureConfig:
    """Default full-size depths."""
    return ArchitectureConfig(k_prime=k_prime, k_diffuse=k_diffuse)

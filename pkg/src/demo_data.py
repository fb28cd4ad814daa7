"""
Demo Data Generator for the Recurrent Priming Codec

Generates a deterministic toy corpus of synthetic RGB images for training
and evaluation smoke runs: smooth gradients, flat rectangles, discs, stripes
and noise textures layered over each other.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import logging

import numpy as np

from src.codec import save_png

logger = logging.getLogger(__name__)

# Layer recipes; each image stacks a background and a few foreground layers
PATTERN_PROFILES = {
    "gradient": {"weight": 1.0, "background": True},
    "rectangles": {"weight": 1.0, "count": (2, 5)},
    "discs": {"weight": 1.0, "count": (1, 4)},
    "stripes": {"weight": 0.6, "period": (4, 16)},
    "noise": {"weight": 0.4, "amplitude": (0.03, 0.12)},
}


@dataclass
class GeneratedImage:
    """One synthetic image and the layers used to draw it"""
    index: int
    pixels: np.ndarray
    layers: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "height": int(self.pixels.shape[0]),
            "width": int(self.pixels.shape[1]),
            "layers": self.layers,
        }


class ToyCorpusGenerator:
    """
    Generate a reproducible directory of PNG images.

    Example:
    ```python
    generator = ToyCorpusGenerator(seed=0)
    paths = generator.write_corpus("data/toy", count=16, height=64)
    ```
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate_image(self, index: int, height: int = 64, width: int = 64) -> GeneratedImage:
        """Draw image ``index``; the result depends only on (seed, index, size)."""
        rng = np.random.default_rng([self.seed, index])
        rows, cols = np.mgrid[0:height, 0:width]
        y = rows / max(height - 1, 1)
        x = cols / max(width - 1, 1)

        start, end = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        angle = rng.uniform(0, 2 * np.pi)
        ramp = np.clip(0.5 + (x - 0.5) * np.cos(angle) + (y - 0.5) * np.sin(angle), 0, 1)
        image = start + ramp[..., None] * (end - start)
        layers = ["gradient"]

        for name in ("rectangles", "discs", "stripes", "noise"):
            profile = PATTERN_PROFILES[name]
            if rng.uniform() > profile["weight"]:
                continue
            layers.append(name)
            if name == "rectangles":
                for _ in range(rng.integers(*profile["count"], endpoint=True)):
                    top, left = rng.integers(0, height), rng.integers(0, width)
                    h, w = rng.integers(4, height // 2 + 1), rng.integers(4, width // 2 + 1)
                    image[top:top + h, left:left + w] = rng.uniform(0, 1, 3)
            elif name == "discs":
                for _ in range(rng.integers(*profile["count"], endpoint=True)):
                    cy, cx = rng.uniform(0, height), rng.uniform(0, width)
                    radius = rng.uniform(3, min(height, width) / 3)
                    mask = (rows - cy) ** 2 + (cols - cx) ** 2 <= radius ** 2
                    image[mask] = rng.uniform(0, 1, 3)
            elif name == "stripes":
                period = rng.integers(*profile["period"], endpoint=True)
                band = ((rows if rng.uniform() < 0.5 else cols) // period) % 2 == 0
                image[band] = 0.5 * image[band] + 0.5 * rng.uniform(0, 1, 3)
            else:
                amplitude = rng.uniform(*profile["amplitude"])
                image = image + rng.normal(0, amplitude, image.shape)

        # Quantize to 8 bits so the PNG round trip is exact
        pixels = np.round(np.clip(image, 0, 1) * 255) / 255
        return GeneratedImage(index, pixels, layers)

    def generate_corpus(self, count: int = 16, height: int = 64,
                        width: Optional[int] = None) -> List[GeneratedImage]:
        width = height if width is None else width
        return [self.generate_image(i, height, width) for i in range(count)]

    def write_corpus(self, directory: Union[str, Path], count: int = 16, height: int = 64,
                     width: Optional[int] = None) -> List[Path]:
        """Write ``count`` images as image_000.png, image_001.png, ..."""
        if count <= 0:
            raise ValueError(f"count must be positive, got {count}")
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        paths = []
        for generated in self.generate_corpus(count, height, width):
            path = root / f"image_{generated.index:03d}.png"
            save_png(path, generated.pixels)
            paths.append(path)
        logger.info(f"Wrote {len(paths)} toy images to {root}")
        return paths

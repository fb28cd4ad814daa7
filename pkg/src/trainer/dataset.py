"""
Training Data - Recurrent Priming Codec

PNG corpus loading and seeded random patch sampling.
"""

from pathlib import Path
from typing import List, Sequence, Union
import logging

import numpy as np

from src.codec import TILE_SIZE, load_png, normalize
from src.errors import ConfigError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png",)


def load_dataset(path: Union[str, Path]) -> List[np.ndarray]:
    """Load every PNG in a directory (sorted by name) as [0, 1] RGB arrays.

    Raises:
        ConfigError: the directory does not exist or holds no PNG files
    """
    root = Path(path)
    if not root.is_dir():
        raise ConfigError(f"dataset directory not found: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ConfigError(f"no PNG images in dataset directory: {root}")
    images = [load_png(p) for p in files]
    logger.info(f"Loaded {len(images)} images from {root}")
    return images


def check_patch_size(patch_size: int) -> None:
    if patch_size <= 0 or patch_size % TILE_SIZE:
        raise ConfigError(f"patch size must be a positive multiple of {TILE_SIZE}, got {patch_size}")


def sample_patches(dataset: Sequence[np.ndarray], patch_size: int, count: int,
                   seed: int, step: int = 0, dtype=np.float32) -> np.ndarray:
    """Draw ``count`` random crops, normalized to [-0.5, 0.5].

    Each crop picks an image uniformly among those at least ``patch_size`` on
    both sides, then a uniform top-left corner. The draw depends only on
    (seed, step).

    Returns:
        Array (count, patch_size, patch_size, 3)
    """
    check_patch_size(patch_size)
    if count <= 0:
        raise ConfigError(f"batch size must be positive, got {count}")
    if not dataset:
        raise ConfigError("dataset is empty")
    eligible = [img for img in dataset if img.shape[0] >= patch_size and img.shape[1] >= patch_size]
    if not eligible:
        largest = max(min(img.shape[:2]) for img in dataset)
        raise ConfigError(
            f"no image is large enough for {patch_size}x{patch_size} patches "
            f"(smallest side of the largest image is {largest})"
        )

    rng = np.random.default_rng([seed, step])
    batch = np.empty((count, patch_size, patch_size, 3), dtype=dtype)
    for k in range(count):
        image = eligible[rng.integers(len(eligible))]
        top = rng.integers(image.shape[0] - patch_size + 1)
        left = rng.integers(image.shape[1] - patch_size + 1)
        batch[k] = normalize(image[top:top + patch_size, left:left + patch_size])
    return batch

"""
Image I/O helpers - Recurrent Priming Codec

PNG loading/saving with Pillow, pixel normalization, and padding to the
16-pixel tile grid.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

from .architecture import TILE_SIZE

PathLike = Union[str, Path]


def load_png(path: PathLike) -> np.ndarray:
    """Read an 8-bit image as float64 RGB in [0, 1], shape (H, W, 3)."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.float64) / 255.0


def save_png(path: PathLike, image: np.ndarray) -> None:
    """Write a [0, 1] RGB float image as an 8-bit PNG."""
    data = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


def normalize(image: np.ndarray) -> np.ndarray:
    """[0, 1] -> [-0.5, 0.5]"""
    return np.asarray(image) - 0.5


def denormalize(image: np.ndarray) -> np.ndarray:
    """[-0.5, 0.5] -> [0, 1]"""
    return np.asarray(image) + 0.5


def pad_to_tiles(image: np.ndarray) -> Tuple[np.ndarray, Tuple[int, int]]:
    """Reflect-pad (H, W, 3) up to multiples of 16.

    Returns:
        (padded image, original (height, width))
    """
    height, width = image.shape[:2]
    pad_h = -height % TILE_SIZE
    pad_w = -width % TILE_SIZE
    if pad_h == 0 and pad_w == 0:
        return image, (height, width)
    # 'symmetric' tolerates pads larger than the image, which 'reflect' does not
    mode = "reflect" if pad_h < height and pad_w < width else "symmetric"
    padded = np.pad(image, ((0, pad_h), (0, pad_w), (0, 0)), mode=mode)
    return padded, (height, width)


def crop(image: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    height, width = size
    return image[:height, :width]

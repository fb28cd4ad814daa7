"""Shared fixtures: tiny codecs and toy images."""

import numpy as np
import pytest

from src.codec import CodecNetwork
from tests.helpers import random_biases, tiny_architecture


@pytest.fixture
def tiny_network():
    """float64 codec with random kernels and biases."""
    rng = np.random.default_rng(0)
    network = CodecNetwork.initialize(tiny_architecture(), rng, dtype=np.float64)
    return random_biases(network, rng)


@pytest.fixture
def toy_image():
    """Smooth 32x48 RGB image in [0, 1] with a little texture."""
    rng = np.random.default_rng(7)
    rows, cols = np.mgrid[0:32, 0:48]
    base = np.stack([rows / 31, cols / 47, 0.5 + 0.3 * np.sin(rows / 3.0)], axis=-1)
    return np.clip(base + rng.normal(0, 0.02, base.shape), 0, 1)

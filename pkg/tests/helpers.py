"""Test helpers: tiny architectures and finite-difference gradient checks."""

import numpy as np

from src.codec import ArchitectureConfig
from src.nn_core import Tape, constant, mul, reduce_sum, reverse_pass

TINY_ENCODER = (4, 8, 8, 8)
TINY_DECODER = (8, 8, 8, 8)


def tiny_architecture(k_prime=0, k_diffuse=0):
    return ArchitectureConfig(encoder_depths=TINY_ENCODER, decoder_depths=TINY_DECODER,
                              k_prime=k_prime, k_diffuse=k_diffuse)


def random_biases(network, rng, scale=0.1):
    arrays = network.arrays()
    for name, value in arrays.items():
        if value.ndim == 1:
            arrays[name] = rng.normal(0.0, scale, size=value.shape)
    network.load_arrays(arrays)
    return network


def numeric_gradient(f, x, h=1e-5):
    """Central differences of scalar f over every entry of x (modified in place, then restored)."""
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        saved = flat_x[i]
        flat_x[i] = saved + h
        plus = f()
        flat_x[i] = saved - h
        minus = f()
        flat_x[i] = saved
        flat_g[i] = (plus - minus) / (2 * h)
    return grad


def relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def check_gradients(build, inputs, seed=0, tolerance=1e-4):
    """Compare reverse-pass gradients of sum(w * build(...)) with finite differences.

    Args:
        build: Called as build(tape) and returning the output Variable; it
            must read the current values of ``inputs``
        inputs: Named trainable Variables (float64)
    """
    rng = np.random.default_rng(seed)
    out_shape = build(None).shape
    weights = constant(rng.normal(size=out_shape))

    tape = Tape()
    loss = reduce_sum(mul(build(tape), weights, tape), tape)
    analytic = reverse_pass(tape, loss, wrt=inputs)

    def scalar():
        return float(np.sum(build(None).value * weights.value))

    for var in inputs:
        numeric = numeric_gradient(scalar, var.value)
        err = relative_error(analytic[var.name], numeric)
        assert err <= tolerance, f"gradient of {var.name}: relative error {err:.3g}"

"""
Iteration Controller - Recurrent Priming Codec

Drives the encoder and decoder through progressive iterations with
hidden-state priming and diffusion.

Per image:
1. k_prime encoder steps on the original image, codes discarded.
2. For every iteration i: k_diffuse discarded encoder steps on the current
   residual, then one kept step whose codes are emitted.
3. The decoder (the compressor runs its own replica) primes k_prime times on
   the first iteration's codes, runs k_diffuse discarded steps on each
   iteration's codes, then one kept step. Kept deltas accumulate into the
   reconstruction, clamped to [-0.5, 0.5].
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional
import logging

import numpy as np

from src.errors import ShapeError
from src.nn_core import Tape, Variable, add, clamp, constant, sub
from .architecture import BINARIZER_DEPTH, MAX_ITERATIONS, TILE_SIZE
from .network import CodecNetwork, CodecState

logger = logging.getLogger(__name__)

PIXEL_LOW = -0.5
PIXEL_HIGH = 0.5

CodeHook = Callable[[int, np.ndarray], np.ndarray]


@dataclass
class IterationTrace:
    """Everything a run of the controller produced."""
    codes: List[Variable] = field(default_factory=list)
    reconstructions: List[Variable] = field(default_factory=list)
    encoder_steps: int = 0
    decoder_steps: int = 0

    def code_array(self) -> np.ndarray:
        """Codes stacked as (iterations, batch, rows, cols, 32)."""
        return np.stack([c.value for c in self.codes])


class DecoderReplica:
    """Decoder side of the loop, shared by the compressor and the decompressor."""

    def __init__(self, network: CodecNetwork, state: CodecState, k_prime: int, k_diffuse: int,
                 tape: Optional[Tape] = None, clamp_output: bool = True):
        self.network = network
        self.state = state
        self.k_prime = k_prime
        self.k_diffuse = k_diffuse
        self.tape = tape
        self.clamp_output = clamp_output
        self.iteration = 0

    def step(self, bits: Variable) -> Variable:
        """Consume one iteration of codes and return the new reconstruction."""
        if self.iteration == 0:
            for _ in range(self.k_prime):
                _, self.state = self.network.decode_step(bits, self.state, self.tape)
        for _ in range(self.k_diffuse):
            _, self.state = self.network.decode_step(bits, self.state, self.tape)
        delta, self.state = self.network.decode_step(bits, self.state, self.tape)

        recon = add(self.state.reconstruction, delta, self.tape)
        if self.clamp_output:
            recon = clamp(recon, PIXEL_LOW, PIXEL_HIGH, self.tape)
        self.state.reconstruction = recon
        self.iteration += 1
        return recon


def check_image(image: np.ndarray) -> None:
    if image.ndim != 4 or image.shape[-1] != 3:
        raise ShapeError(f"expected images of shape (batch, H, W, 3), got {image.shape}")
    if image.shape[1] % TILE_SIZE or image.shape[2] % TILE_SIZE:
        raise ShapeError(
            f"image size {image.shape[1]}x{image.shape[2]} is not a multiple of {TILE_SIZE}"
        )


def run_iterations(network: CodecNetwork, images: np.ndarray, iterations: int,
                   k_prime: int = 0, k_diffuse: int = 0, tape: Optional[Tape] = None,
                   quantize: bool = True, code_hook: Optional[CodeHook] = None,
                   clamp_output: bool = True) -> IterationTrace:
    """Run the closed encoder/decoder loop.

    Args:
        network: Codec parameters
        images: Normalized images (batch, H, W, 3) in [-0.5, 0.5]
        iterations: Number of kept iterations, 1..16
        k_prime: Priming steps before the first iteration
        k_diffuse: Diffusion steps before every iteration
        tape: Record the whole unrolled computation on this tape
        quantize: Emit sign codes; False passes the continuous tanh codes
        code_hook: Called as hook(iteration, codes) on every kept code slice;
            its return value replaces the codes
        clamp_output: Clamp reconstructions to the pixel range

    Returns:
        IterationTrace with one code slice and one reconstruction per iteration
    """
    if not 1 <= iterations <= MAX_ITERATIONS:
        raise ValueError(f"iterations must be in [1, {MAX_ITERATIONS}], got {iterations}")
    check_image(images)
    batch, height, width, _ = images.shape

    image = constant(images.astype(network.dtype, copy=False))
    state = network.new_state(batch, height, width)
    decoder = DecoderReplica(network, state, k_prime, k_diffuse, tape, clamp_output)
    trace = IterationTrace()

    for _ in range(k_prime):
        _, state = network.encode_step(image, state, tape, quantize)

    residual = image
    for i in range(iterations):
        for _ in range(k_diffuse):
            _, state = network.encode_step(residual, state, tape, quantize)
        bits, state = network.encode_step(residual, state, tape, quantize)
        if code_hook is not None:
            bits = Variable(np.asarray(code_hook(i, bits.value), dtype=network.dtype))
        trace.codes.append(bits)

        recon = decoder.step(bits)
        trace.reconstructions.append(recon)
        residual = sub(image, recon, tape)

    trace.encoder_steps = state.steps["encoder"]
    trace.decoder_steps = decoder.state.steps["decoder"]
    return trace


def decode_iterations(network: CodecNetwork, codes: np.ndarray, k_prime: int = 0,
                      k_diffuse: int = 0, fill: float = 0.0,
                      clamp_output: bool = True) -> List[np.ndarray]:
    """Decode stored codes of shape (iterations, batch, rows, cols, 32).

    Entries equal to 0 are absent bits and are replaced by ``fill``.

    Returns:
        One reconstruction (batch, H, W, 3) per iteration
    """
    codes = np.asarray(codes)
    if codes.ndim != 5 or codes.shape[-1] != BINARIZER_DEPTH:
        raise ShapeError(f"codes must be (iterations, batch, rows, cols, 32), got {codes.shape}")
    iterations, batch, rows, cols, _ = codes.shape
    if iterations > MAX_ITERATIONS:
        raise ShapeError(f"codes hold {iterations} iterations, at most {MAX_ITERATIONS} allowed")

    state = network.new_state(batch, rows * TILE_SIZE, cols * TILE_SIZE)
    decoder = DecoderReplica(network, state, k_prime, k_diffuse, None, clamp_output)
    values = np.where(codes == 0, fill, codes).astype(network.dtype)
    return [decoder.step(Variable(values[i])).value for i in range(iterations)]

"""
Codec Network - Recurrent Priming Codec

Parameter container and the single-step encoder/decoder passes.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np

from src.errors import ShapeError
from src.nn_core import (
    GruParams, Tape, Variable, binarize, bias_add, conv2d, depth_to_space, gru_step, tanh,
)
from .architecture import (
    ArchitectureConfig, BINARIZER_DEPTH, DECODER_KERNELS, ENCODER_KERNELS, TILE_SIZE,
)

logger = logging.getLogger(__name__)

GRU_FIELDS = ("w", "w_z", "w_r", "u", "u_z", "u_r", "b", "b_z", "b_r")


@dataclass
class CodecState:
    """Hidden tensors of every GRU layer plus the running reconstruction.

    All tensors start at zero for every image; priming is the only thing
    that warms them.
    """
    encoder: List[Variable]
    decoder: List[Variable]
    reconstruction: Variable
    steps: Dict[str, int] = field(default_factory=lambda: {"encoder": 0, "decoder": 0})

    @classmethod
    def initial(cls, arch: ArchitectureConfig, batch: int, height: int, width: int,
                dtype=np.float64) -> "CodecState":
        _require_tile_multiple(height, width)
        enc = []
        for i, depth in enumerate(arch.encoder_depths[1:], start=2):
            scale = 2 ** i
            enc.append(Variable(np.zeros((batch, height // scale, width // scale, depth), dtype)))
        dec = []
        rows, cols = height // TILE_SIZE, width // TILE_SIZE
        for i, depth in enumerate(arch.decoder_depths):
            scale = 2 ** i
            dec.append(Variable(np.zeros((batch, rows * scale, cols * scale, depth), dtype)))
        recon = Variable(np.zeros((batch, height, width, 3), dtype))
        return cls(enc, dec, recon)


def _require_tile_multiple(height: int, width: int) -> None:
    if height % TILE_SIZE or width % TILE_SIZE:
        raise ShapeError(
            f"image size {height}x{width} is not a multiple of {TILE_SIZE}; pad before coding"
        )


def _glorot(rng: np.random.Generator, shape: Tuple[int, ...], gain: float,
            dtype) -> np.ndarray:
    k_h, k_w, c_in, c_out = shape
    limit = gain * np.sqrt(6.0 / (k_h * k_w * c_in + k_h * k_w * c_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class CodecNetwork:
    """All parameters of one encoder/decoder pair.

    Parameter names are stable and double as checkpoint entry names:
    ``enc0/w``, ``enc1/u_z``, ``bin/b``, ``dec3/w_r``, ``out/w`` and so on.
    """

    def __init__(self, arch: ArchitectureConfig, params: Dict[str, np.ndarray]):
        self.arch = arch
        self.params: Dict[str, Variable] = {}
        expected = self.parameter_shapes(arch)
        for name, shape in expected.items():
            if name not in params:
                raise ShapeError(f"missing parameter '{name}'")
            value = np.asarray(params[name])
            if value.shape != shape:
                raise ShapeError(f"parameter '{name}' has shape {value.shape}, expected {shape}")
            self.params[name] = Variable(value, name=name, requires_grad=True)
        self.dtype = next(iter(self.params.values())).dtype

    # -------------------------------------------------------------------------
    # Construction
    # -------------------------------------------------------------------------

    @staticmethod
    def parameter_shapes(arch: ArchitectureConfig) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        e = arch.encoder_depths
        d = arch.decoder_depths

        k0 = ENCODER_KERNELS[0][0]
        shapes["enc0/w"] = (k0, k0, 3, e[0])
        shapes["enc0/b"] = (e[0],)
        for i in (1, 2, 3):
            k_in, k_hidden, _ = ENCODER_KERNELS[i]
            shapes.update(_gru_shapes(f"enc{i}", k_in, k_hidden, e[i - 1], e[i]))
        shapes["bin/w"] = (1, 1, e[3], BINARIZER_DEPTH)
        shapes["bin/b"] = (BINARIZER_DEPTH,)

        shapes["dec0/w"] = (1, 1, BINARIZER_DEPTH, d[0])
        shapes["dec0/b"] = (d[0],)
        c_in = d[0]
        for i in (1, 2, 3, 4):
            k_in, k_hidden, _ = DECODER_KERNELS[i]
            shapes.update(_gru_shapes(f"dec{i}", k_in, k_hidden, c_in, d[i - 1]))
            c_in = d[i - 1] // 4
        shapes["out/w"] = (1, 1, c_in, 3)
        shapes["out/b"] = (3,)
        return shapes

    @classmethod
    def initialize(cls, arch: ArchitectureConfig, rng: np.random.Generator,
                   dtype=np.float32) -> "CodecNetwork":
        """Uniform +-sqrt(6/(fan_in+fan_out)) kernels, hidden kernels at half scale, zero biases."""
        params = {}
        for name, shape in cls.parameter_shapes(arch).items():
            leaf = name.split("/")[1]
            if len(shape) == 1:
                params[name] = np.zeros(shape, dtype=dtype)
            else:
                gain = 0.5 if leaf.startswith("u") else 1.0
                params[name] = _glorot(rng, shape, gain, dtype)
        logger.info(f"Initialized codec network ({len(params)} tensors, digest {arch.digest()})")
        return cls(arch, params)

    @classmethod
    def zeros(cls, arch: ArchitectureConfig, dtype=np.float64) -> "CodecNetwork":
        return cls(arch, {n: np.zeros(s, dtype) for n, s in cls.parameter_shapes(arch).items()})

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: var.value for name, var in self.params.items()}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, var in self.params.items():
            var.value = np.asarray(arrays[name], dtype=var.dtype)

    def variables(self) -> List[Variable]:
        return list(self.params.values())

    def gru(self, prefix: str) -> GruParams:
        return GruParams(**{f: self.params[f"{prefix}/{f}"] for f in GRU_FIELDS})

    def new_state(self, batch: int, height: int, width: int) -> CodecState:
        return CodecState.initial(self.arch, batch, height, width, self.dtype)

    # -------------------------------------------------------------------------
    # Single steps
    # -------------------------------------------------------------------------

    def encode_step(self, residual: Variable, state: CodecState, tape: Optional[Tape] = None,
                    quantize: bool = True) -> Tuple[Variable, CodecState]:
        """Run E0..E3 and the binarizer on one residual.

        Returns:
            (bits of shape (batch, H/16, W/16, 32), advanced state). With
            ``quantize=False`` the continuous tanh codes are returned instead.
        """
        if residual.value.ndim != 4 or residual.shape[-1] != 3:
            raise ShapeError(f"encode_step expects (batch, H, W, 3), got {residual.shape}")
        _require_tile_multiple(residual.shape[1], residual.shape[2])

        p = self.params
        x = tanh(bias_add(conv2d(residual, p["enc0/w"], ENCODER_KERNELS[0][2], tape),
                          p["enc0/b"], tape), tape)
        hidden = []
        for i in (1, 2, 3):
            x = gru_step(x, state.encoder[i - 1], self.gru(f"enc{i}"), ENCODER_KERNELS[i][2], tape)
            hidden.append(x)
        pre = tanh(bias_add(conv2d(x, p["bin/w"], 1, tape), p["bin/b"], tape), tape)
        bits = binarize(pre, tape) if quantize else pre

        steps = dict(state.steps)
        steps["encoder"] += 1
        return bits, CodecState(hidden, state.decoder, state.reconstruction, steps)

    def decode_step(self, bits: Variable, state: CodecState,
                    tape: Optional[Tape] = None) -> Tuple[Variable, CodecState]:
        """Run D0..D4 and the output layer on one iteration of codes.

        Returns:
            (delta image with values in (-1, 1), advanced state)
        """
        if bits.value.ndim != 4 or bits.shape[-1] != BINARIZER_DEPTH:
            raise ShapeError(f"decode_step expects codes of depth {BINARIZER_DEPTH}, got {bits.shape}")

        p = self.params
        x = tanh(bias_add(conv2d(bits, p["dec0/w"], 1, tape), p["dec0/b"], tape), tape)
        hidden = []
        for i in (1, 2, 3, 4):
            h = gru_step(x, state.decoder[i - 1], self.gru(f"dec{i}"), 1, tape)
            hidden.append(h)
            x = depth_to_space(h, 2, tape)
        delta = tanh(bias_add(conv2d(x, p["out/w"], 1, tape), p["out/b"], tape), tape)

        steps = dict(state.steps)
        steps["decoder"] += 1
        return delta, CodecState(state.encoder, hidden, state.reconstruction, steps)


def _gru_shapes(prefix: str, k_in: int, k_hidden: int, c_in: int,
                depth: int) -> Dict[str, Tuple[int, ...]]:
    shapes = {}
    for gate in ("w", "w_z", "w_r"):
        shapes[f"{prefix}/{gate}"] = (k_in, k_in, c_in, depth)
    for gate in ("u", "u_z", "u_r"):
        shapes[f"{prefix}/{gate}"] = (k_hidden, k_hidden, depth, depth)
    for gate in ("b", "b_z", "b_r"):
        shapes[f"{prefix}/{gate}"] = (depth,)
    return shapes

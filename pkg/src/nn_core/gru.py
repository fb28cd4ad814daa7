"""
Convolutional GRU Cell - Recurrent Priming Codec

    z  = sigmoid(W_z * x + U_z * h + b_z)
    r  = sigmoid(W_r * x + U_r * h + b_r)
    h~ = tanh(W * x + U * (r . h) + b)
    h' = (1 - z) . h + z . h~

``*`` is a zero-padded convolution: input kernels are I x I and may stride,
hidden kernels are H x H with stride 1. The new hidden state is also the
layer output.
"""

from dataclasses import dataclass, fields
from typing import Dict, Iterator, Optional

import numpy as np

from src.errors import ShapeError
from .tensor import (
    Tape, Variable, add, bias_add, conv2d, mul, one_minus, sigmoid, tanh,
)


@dataclass
class GruParams:
    """Kernels and biases of one convolutional GRU layer."""
    w: Variable
    w_z: Variable
    w_r: Variable
    u: Variable
    u_z: Variable
    u_r: Variable
    b: Variable
    b_z: Variable
    b_r: Variable

    def __post_init__(self):
        input_shapes = {self.w.shape, self.w_z.shape, self.w_r.shape}
        hidden_shapes = {self.u.shape, self.u_z.shape, self.u_r.shape}
        if len(input_shapes) != 1 or len(hidden_shapes) != 1:
            raise ShapeError("GRU input kernels and hidden kernels must each share one shape")
        hidden_depth = self.w.shape[3]
        h_k, _, h_in, h_out = self.u.shape
        if h_in != hidden_depth or h_out != hidden_depth:
            raise ShapeError(
                f"GRU hidden kernel {self.u.shape} does not match hidden depth {hidden_depth}"
            )
        for bias in (self.b, self.b_z, self.b_r):
            if bias.shape != (hidden_depth,):
                raise ShapeError(f"GRU bias {bias.shape} does not match hidden depth {hidden_depth}")

    @property
    def input_kernel(self) -> int:
        return self.w.shape[0]

    @property
    def hidden_kernel(self) -> int:
        return self.u.shape[0]

    @property
    def input_depth(self) -> int:
        return self.w.shape[2]

    @property
    def hidden_depth(self) -> int:
        return self.w.shape[3]

    def variables(self) -> Iterator[Variable]:
        for f in fields(self):
            yield getattr(self, f.name)

    def as_dict(self) -> Dict[str, Variable]:
        return {v.name: v for v in self.variables()}


def gru_step(x: Variable, h: Variable, params: GruParams, stride: int = 1,
             tape: Optional[Tape] = None) -> Variable:
    """Advance one GRU layer by one step.

    Args:
        x: Layer input (batch, height, width, input_depth)
        h: Previous hidden state at the strided resolution of ``x``
        params: Layer parameters
        stride: Stride of the input convolutions
        tape: Optional tape to record on

    Returns:
        The new hidden state, which is also the layer output
    """
    if x.shape[-1] != params.input_depth:
        raise ShapeError(f"gru_step: input depth {x.shape[-1]} != {params.input_depth}")
    if h.shape[-1] != params.hidden_depth:
        raise ShapeError(f"gru_step: hidden depth {h.shape[-1]} != {params.hidden_depth}")
    expected = (x.shape[0], -(-x.shape[1] // stride), -(-x.shape[2] // stride))
    if h.shape[:3] != expected:
        raise ShapeError(f"gru_step: hidden state {h.shape} is not aligned with input {x.shape}")

    p = params
    z = sigmoid(bias_add(add(conv2d(x, p.w_z, stride, tape), conv2d(h, p.u_z, 1, tape), tape),
                         p.b_z, tape), tape)
    r = sigmoid(bias_add(add(conv2d(x, p.w_r, stride, tape), conv2d(h, p.u_r, 1, tape), tape),
                         p.b_r, tape), tape)
    candidate = tanh(bias_add(add(conv2d(x, p.w, stride, tape),
                                  conv2d(mul(r, h, tape), p.u, 1, tape), tape),
                              p.b, tape), tape)
    return add(mul(one_minus(z, tape), h, tape), mul(z, candidate, tape), tape)


def zero_state(batch: int, height: int, width: int, depth: int,
               dtype=np.float64) -> Variable:
    """Zero-initialized hidden state."""
    return Variable(np.zeros((batch, height, width, depth), dtype=dtype))

"""
Tensor Operations - Recurrent Priming Codec

Dense NHWC tensor math with a recording tape for reverse-mode
differentiation. Every operation takes an optional ``tape``; when it is
given, the operation records the closure that maps the output gradient to
the gradients of its inputs.

Example:
```python
tape = Tape()
x = constant(np.random.rand(1, 8, 8, 3))
w = Variable(np.random.rand(3, 3, 3, 4), name="w", requires_grad=True)
loss = reduce_sum(conv2d(x, w, stride=2, tape=tape), tape=tape)
grads = reverse_pass(tape, loss, wrt=[w])
print(grads["w"].shape)  # (3, 3, 3, 4)
```
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import ShapeError

logger = logging.getLogger(__name__)

GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Variable:
    """A tensor value that can take part in a recorded computation."""

    __slots__ = ("value", "name", "requires_grad")

    def __init__(self, value: np.ndarray, name: Optional[str] = None,
                 requires_grad: bool = False):
        self.value = np.asarray(value)
        self.name = name
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def dtype(self) -> np.dtype:
        return self.value.dtype

    def __repr__(self) -> str:
        label = self.name or "tensor"
        return f"Variable({label}, shape={self.shape}, dtype={self.dtype})"


@dataclass
class TapeEntry:
    """One recorded operation."""
    op: str
    output: Variable
    inputs: Tuple[Variable, ...]
    backward: GradFn


class Tape:
    """Ordered record of operations for a single reverse pass.

    A tape has one writer; do not share a live tape across threads.
    """

    def __init__(self):
        self.entries: List[TapeEntry] = []

    def record(self, op: str, output: Variable, inputs: Sequence[Variable],
               backward: GradFn) -> None:
        self.entries.append(TapeEntry(op, output, tuple(inputs), backward))

    def __len__(self) -> int:
        return len(self.entries)

    def clear(self) -> None:
        self.entries.clear()


def constant(value: np.ndarray, name: Optional[str] = None) -> Variable:
    """Wrap an array that never receives a gradient."""
    return Variable(value, name=name, requires_grad=False)


def record_op(op: str, value: np.ndarray, inputs: Sequence[Variable],
              backward: GradFn, tape: Optional[Tape]) -> Variable:
    """Create an output variable and record it when a tape is active.

    Other modules use this to register operations whose gradient contract
    is defined outside this file (for example the frozen-weight loss).
    """
    out = Variable(value)
    if tape is not None:
        tape.record(op, out, inputs, backward)
    return out


def _require_same_shape(op: str, a: Variable, b: Variable) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _require_rank4(op: str, x: Variable) -> None:
    if x.value.ndim != 4:
        raise ShapeError(f"{op}: expected (batch, height, width, channels), got {x.shape}")


# =============================================================================
# Elementwise
# =============================================================================

def add(a: Variable, b: Variable, tape: Optional[Tape] = None) -> Variable:
    _require_same_shape("add", a, b)
    return record_op("add", a.value + b.value, (a, b), lambda g: (g, g), tape)


def sub(a: Variable, b: Variable, tape: Optional[Tape] = None) -> Variable:
    _require_same_shape("sub", a, b)
    return record_op("sub", a.value - b.value, (a, b), lambda g: (g, -g), tape)


def mul(a: Variable, b: Variable, tape: Optional[Tape] = None) -> Variable:
    _require_same_shape("mul", a, b)
    av, bv = a.value, b.value
    return record_op("mul", av * bv, (a, b), lambda g: (g * bv, g * av), tape)


def scale(a: Variable, factor: float, tape: Optional[Tape] = None) -> Variable:
    return record_op("scale", a.value * factor, (a,), lambda g: (g * factor,), tape)


def one_minus(a: Variable, tape: Optional[Tape] = None) -> Variable:
    return record_op("one_minus", 1 - a.value, (a,), lambda g: (-g,), tape)


def bias_add(x: Variable, bias: Variable, tape: Optional[Tape] = None) -> Variable:
    """Add a per-channel bias to an NHWC tensor."""
    _require_rank4("bias_add", x)
    if bias.shape != (x.shape[-1],):
        raise ShapeError(f"bias_add: bias {bias.shape} does not match {x.shape[-1]} channels")

    def backward(g):
        return g, g.sum(axis=(0, 1, 2))

    return record_op("bias_add", x.value + bias.value, (x, bias), backward, tape)


def sigmoid(x: Variable, tape: Optional[Tape] = None) -> Variable:
    y = 0.5 * (np.tanh(0.5 * x.value) + 1)
    return record_op("sigmoid", y, (x,), lambda g: (g * y * (1 - y),), tape)


def tanh(x: Variable, tape: Optional[Tape] = None) -> Variable:
    y = np.tanh(x.value)
    return record_op("tanh", y, (x,), lambda g: (g * (1 - y * y),), tape)


def binarize(b: Variable, tape: Optional[Tape] = None) -> Variable:
    """Sign quantizer with sign(0) = +1 and a straight-through gradient."""
    one = np.ones((), dtype=b.dtype)
    y = np.where(b.value >= 0, one, -one)
    return record_op("binarize", y, (b,), lambda g: (g,), tape)


def clamp(x: Variable, low: float, high: float, tape: Optional[Tape] = None) -> Variable:
    """Clip values; the gradient flows only where the input was inside [low, high]."""
    mask = (x.value >= low) & (x.value <= high)
    y = np.clip(x.value, low, high)
    return record_op("clamp", y, (x,), lambda g: (g * mask,), tape)


def reduce_sum(x: Variable, tape: Optional[Tape] = None) -> Variable:
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g, shape).astype(x.dtype, copy=True),)

    return record_op("reduce_sum", np.asarray(x.value.sum()), (x,), backward, tape)


# =============================================================================
# Spatial
# =============================================================================

def conv2d(x: Variable, kernel: Variable, stride: int = 1,
           tape: Optional[Tape] = None) -> Variable:
    """Zero-padded 'same' cross-correlation.

    Args:
        x: Input of shape (batch, height, width, c_in)
        kernel: Weights of shape (k, k, c_in, c_out), k odd
        stride: 1 or 2; output spatial size is ceil(input / stride)
        tape: Optional tape to record on

    Returns:
        Output of shape (batch, ceil(h/stride), ceil(w/stride), c_out)
    """
    _require_rank4("conv2d", x)
    if kernel.value.ndim != 4 or kernel.shape[0] != kernel.shape[1]:
        raise ShapeError(f"conv2d: kernel must be (k, k, c_in, c_out), got {kernel.shape}")
    k, _, c_in, c_out = kernel.shape
    if k % 2 == 0:
        raise ShapeError(f"conv2d: kernel size must be odd, got {k}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d: stride must be 1 or 2, got {stride}")
    if x.shape[-1] != c_in:
        raise ShapeError(f"conv2d: input has {x.shape[-1]} channels, kernel expects {c_in}")

    batch, height, width, _ = x.shape
    pad = k // 2
    padded = np.pad(x.value, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    out_h, out_w = windows.shape[1], windows.shape[2]
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(-1, k * k * c_in)
    w2 = kernel.value.reshape(k * k * c_in, c_out)
    out = (cols @ w2).reshape(batch, out_h, out_w, c_out)

    def backward(g):
        g2 = g.reshape(-1, c_out)
        grad_w = (cols.T @ g2).reshape(kernel.shape)
        dcols = (g2 @ w2.T).reshape(batch, out_h, out_w, k, k, c_in)
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        for i in range(k):
            for j in range(k):
                grad_padded[:, i:i + stride * out_h:stride, j:j + stride * out_w:stride, :] += (
                    dcols[:, :, :, i, j, :]
                )
        grad_x = grad_padded[:, pad:pad + height, pad:pad + width, :]
        return grad_x, grad_w

    return record_op("conv2d", out, (x, kernel), backward, tape)


def depth_to_space(x: Variable, block: int = 2, tape: Optional[Tape] = None) -> Variable:
    """Move channel groups into 2x2 spatial blocks.

    Output pixel (2y+dy, 2x+dx, c) takes input (y, x, c*4 + dy*2 + dx).
    """
    _require_rank4("depth_to_space", x)
    if block != 2:
        raise ShapeError(f"depth_to_space: only block=2 is supported, got {block}")
    batch, height, width, channels = x.shape
    if channels % 4:
        raise ShapeError(f"depth_to_space: {channels} channels not divisible by 4")
    out = (x.value.reshape(batch, height, width, channels // 4, 2, 2)
           .transpose(0, 1, 4, 2, 5, 3)
           .reshape(batch, 2 * height, 2 * width, channels // 4))
    return record_op("depth_to_space", out, (x,),
                     lambda g: (_space_to_depth_array(g),), tape)


def space_to_depth(x: Variable, block: int = 2, tape: Optional[Tape] = None) -> Variable:
    """Exact inverse of :func:`depth_to_space`."""
    _require_rank4("space_to_depth", x)
    if block != 2:
        raise ShapeError(f"space_to_depth: only block=2 is supported, got {block}")
    if x.shape[1] % 2 or x.shape[2] % 2:
        raise ShapeError(f"space_to_depth: odd spatial size {x.shape[1:3]}")
    out = _space_to_depth_array(x.value)
    return record_op("space_to_depth", out, (x,),
                     lambda g: (_depth_to_space_array(g),), tape)


def _space_to_depth_array(a: np.ndarray) -> np.ndarray:
    batch, height, width, channels = a.shape
    return (a.reshape(batch, height // 2, 2, width // 2, 2, channels)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(batch, height // 2, width // 2, channels * 4))


def _depth_to_space_array(a: np.ndarray) -> np.ndarray:
    batch, height, width, channels = a.shape
    return (a.reshape(batch, height, width, channels // 4, 2, 2)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(batch, 2 * height, 2 * width, channels // 4))


# =============================================================================
# Reverse pass
# =============================================================================

def reverse_pass(tape: Tape, output: Variable, seed: Optional[np.ndarray] = None,
                 wrt: Optional[Iterable[Variable]] = None) -> Dict[str, np.ndarray]:
    """Propagate gradients from ``output`` back through the tape.

    Entries are visited in exact reverse recording order. Gradients are
    accumulated into fresh arrays on every call, so repeated passes over the
    same tape are bit-identical.

    Args:
        tape: The recorded computation
        output: The value to differentiate (normally a scalar)
        seed: Upstream gradient for ``output``; ones by default
        wrt: Variables to report; defaults to every named trainable input on the tape

    Returns:
        Mapping of variable name to gradient. Variables that received no
        gradient get zeros, so an empty tape yields all-zero gradients.
    """
    if seed is None:
        seed = np.ones_like(output.value)
    grads: Dict[int, np.ndarray] = {id(output): np.asarray(seed, dtype=output.dtype)}

    for entry in reversed(tape.entries):
        upstream = grads.get(id(entry.output))
        if upstream is None:
            continue
        for var, grad in zip(entry.inputs, entry.backward(upstream)):
            if grad is None or not _wants_grad(var):
                continue
            key = id(var)
            grads[key] = grad if key not in grads else grads[key] + grad

    if wrt is None:
        wrt = _trainable_inputs(tape, output)

    result: Dict[str, np.ndarray] = {}
    for var in wrt:
        if var.name is None:
            raise ValueError("reverse_pass: variables in 'wrt' must be named")
        grad = grads.get(id(var))
        result[var.name] = np.zeros_like(var.value) if grad is None else grad
    return result


def _wants_grad(var: Variable) -> bool:
    # Intermediates carry no name and are always propagated through.
    return var.requires_grad or var.name is None


def _trainable_inputs(tape: Tape, output: Variable) -> List[Variable]:
    seen = set()
    found: List[Variable] = []
    candidates = [output] + [v for e in tape.entries for v in e.inputs]
    for var in candidates:
        if var.requires_grad and var.name is not None and id(var) not in seen:
            seen.add(id(var))
            found.append(var)
    return found

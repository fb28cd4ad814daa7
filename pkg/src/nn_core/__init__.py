"""
Neural-network core for the Recurrent Priming Codec

NHWC tensor operations with a reverse-mode tape, plus the convolutional GRU cell.
"""

from .tensor import (
    Variable,
    Tape,
    TapeEntry,
    constant,
    record_op,
    add,
    sub,
    mul,
    scale,
    one_minus,
    bias_add,
    sigmoid,
    tanh,
    binarize,
    clamp,
    reduce_sum,
    conv2d,
    depth_to_space,
    space_to_depth,
    reverse_pass,
)

from .gru import (
    GruParams,
    gru_step,
    zero_state,
)

__all__ = [
    # Tensors and tape
    'Variable',
    'Tape',
    'TapeEntry',
    'constant',
    'record_op',
    'reverse_pass',
    # Elementwise
    'add',
    'sub',
    'mul',
    'scale',
    'one_minus',
    'bias_add',
    'sigmoid',
    'tanh',
    'binarize',
    'clamp',
    'reduce_sum',
    # Spatial
    'conv2d',
    'depth_to_space',
    'space_to_depth',
    # Recurrent
    'GruParams',
    'gru_step',
    'zero_state',
]

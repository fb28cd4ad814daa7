"""
Codec Module for the Recurrent Priming Codec

Recurrent convolutional encoder/decoder with progressive iterations,
hidden-state priming and diffusion.
"""

from .architecture import (
    ArchitectureConfig,
    BINARIZER_DEPTH,
    TILE_SIZE,
    MAX_ITERATIONS,
    ENCODER_KERNELS,
    DECODER_KERNELS,
    create_desk_architecture,
    create_full_architecture,
)

from .network import (
    CodecNetwork,
    CodecState,
)

from .controller import (
    IterationTrace,
    DecoderReplica,
    run_iterations,
    decode_iterations,
    PIXEL_LOW,
    PIXEL_HIGH,
)

from .progressive import (
    CodeTensor,
    ProgressiveCodec,
    nominal_bpp,
)

from .imaging import (
    load_png,
    save_png,
    normalize,
    denormalize,
    pad_to_tiles,
    crop,
)

__all__ = [
    # Architecture
    'ArchitectureConfig',
    'BINARIZER_DEPTH',
    'TILE_SIZE',
    'MAX_ITERATIONS',
    'ENCODER_KERNELS',
    'DECODER_KERNELS',
    'create_desk_architecture',
    'create_full_architecture',
    # Network
    'CodecNetwork',
    'CodecState',
    # Iteration control
    'IterationTrace',
    'DecoderReplica',
    'run_iterations',
    'decode_iterations',
    'PIXEL_LOW',
    'PIXEL_HIGH',
    # Codec
    'CodeTensor',
    'ProgressiveCodec',
    'nominal_bpp',
    # Images
    'load_png',
    'save_png',
    'normalize',
    'denormalize',
    'pad_to_tiles',
    'crop',
]

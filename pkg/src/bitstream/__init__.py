"""
Bitstream Module for the Recurrent Priming Codec

Container format for codes and SABR height maps, with an adaptive binary
range coder for the optional entropy layer.
"""

from .range_coder import (
    CoderContext,
    RangeEncoder,
    RangeDecoder,
    encode_bits,
    decode_bits,
)

from .container import (
    ContainerExtension,
    DecodedStream,
    serialize,
    deserialize,
    measured_bpp,
    height_map_bytes,
    MAGIC,
    VERSION,
    FLAG_ENTROPY,
    FLAG_SABR,
    FLAG_EXTENSION,
    HEADER,
    LENGTH,
)

__all__ = [
    # Range coder
    'CoderContext',
    'RangeEncoder',
    'RangeDecoder',
    'encode_bits',
    'decode_bits',
    # Container
    'ContainerExtension',
    'DecodedStream',
    'serialize',
    'deserialize',
    'measured_bpp',
    'height_map_bytes',
    'MAGIC',
    'VERSION',
    'FLAG_ENTROPY',
    'FLAG_SABR',
    'FLAG_EXTENSION',
    'HEADER',
    'LENGTH',
]

"""
Container Format - Recurrent Priming Codec

Byte layout (all integers little-endian, see FORMAT.md):

    magic "RPC1" | version u8 | flags u8 | width u32 | height u32 | iterations u8
    [flags bit2] crop_width u32 | crop_height u32 | k_prime u8 | k_diffuse u8 | digest 8B
    [flags bit1] map_len u32 | raw DEFLATE height map (one u8 per tile, row-major)
    payload_len u32 | payload

Raw payloads pack bits MSB-first in (iteration, row, col, depth) order with
bit 1 meaning +1, skipping stacks the height map masks out. Entropy-coded
payloads start with a mode byte: 1 for range-coded bits, 0 for the raw
packing stored as-is when coding would not make it smaller.
"""

from dataclasses import dataclass
from typing import Optional, Union
import logging
import struct
import zlib

import numpy as np

from src.codec import BINARIZER_DEPTH, CodeTensor, MAX_ITERATIONS, TILE_SIZE
from src.errors import (
    BadMagicError, CorruptStreamError, ShapeError, TruncatedStreamError, VersionMismatchError,
)
from src.sabr import HeightMap
from .range_coder import decode_bits, encode_bits

logger = logging.getLogger(__name__)

MAGIC = b"RPC1"
VERSION = 1
FLAG_ENTROPY = 0x01
FLAG_SABR = 0x02
FLAG_EXTENSION = 0x04
KNOWN_FLAGS = FLAG_ENTROPY | FLAG_SABR | FLAG_EXTENSION

HEADER = struct.Struct("<4sBBIIB")
EXTENSION = struct.Struct("<IIBB8s")
LENGTH = struct.Struct("<I")

MODE_STORED = 0
MODE_CODED = 1


@dataclass
class ContainerExtension:
    """Optional self-description block."""
    crop_width: int
    crop_height: int
    k_prime: int = 0
    k_diffuse: int = 0
    digest: str = "0" * 16

    def pack(self) -> bytes:
        return EXTENSION.pack(self.crop_width, self.crop_height, self.k_prime, self.k_diffuse,
                              bytes.fromhex(self.digest))

    @classmethod
    def unpack(cls, raw: bytes) -> "ContainerExtension":
        crop_w, crop_h, k_prime, k_diffuse, digest = EXTENSION.unpack(raw)
        return cls(crop_w, crop_h, k_prime, k_diffuse, digest.hex())


@dataclass
class DecodedStream:
    """Everything recovered from one container."""
    codes: CodeTensor
    height_map: Optional[HeightMap]
    width: int
    height: int
    entropy: bool
    extension: Optional[ContainerExtension] = None


class _Reader:
    """Cursor that refuses to read past the end of the data."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedStreamError(
                f"truncated stream: {what} needs {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def length_prefixed(self, what: str) -> bytes:
        (n,) = LENGTH.unpack(self.take(LENGTH.size, f"{what} length"))
        return self.take(n, what)


# =============================================================================
# Bit ordering
# =============================================================================

def _keep_mask(iterations: int, rows: int, cols: int,
               height_map: Optional[HeightMap]) -> np.ndarray:
    """Boolean (t, rows, cols) mask of stacks present in the stream."""
    if height_map is None:
        return np.ones((iterations, rows, cols), dtype=bool)
    return np.arange(iterations)[:, None, None] < height_map.counts[None].astype(np.int64)


def _contexts(iterations: int, keep: np.ndarray) -> np.ndarray:
    """Context index (iteration * 32 + depth plane) of every kept bit, in stream order."""
    depth = np.arange(BINARIZER_DEPTH)
    per_iter = np.arange(iterations)[:, None, None, None] * BINARIZER_DEPTH + depth
    full = np.broadcast_to(per_iter, keep.shape + (BINARIZER_DEPTH,))
    return full[keep].ravel()


def _pack_raw(bits01: np.ndarray) -> bytes:
    return np.packbits(bits01.astype(np.uint8), bitorder="big").tobytes()


# =============================================================================
# Serialize / deserialize
# =============================================================================

def serialize(codes: CodeTensor, height_map: Optional[HeightMap] = None, entropy: bool = False,
              extension: Optional[ContainerExtension] = None) -> bytes:
    """Encode codes (and an optional SABR height map) into container bytes.

    Args:
        codes: Code tensor; every stack the map keeps must hold +1/-1 bits
        height_map: Per-tile iteration counts, or None to keep every stack
        entropy: Range-code the payload
        extension: Optional crop/priming/digest block

    Returns:
        Container bytes
    """
    iterations, rows, cols = codes.iterations, codes.rows, codes.cols
    if height_map is not None:
        if height_map.shape != (rows, cols):
            raise ShapeError(
                f"height map {height_map.shape} does not match code grid {(rows, cols)}"
            )
        if height_map.counts.max(initial=0) > iterations:
            raise ShapeError(
                f"height map asks for {int(height_map.counts.max())} iterations, "
                f"codes hold {iterations}"
            )
    keep = _keep_mask(iterations, rows, cols, height_map)
    kept = codes.bits[keep]
    if not np.isin(kept, (-1, 1)).all():
        raise ValueError("serialize: kept bit stacks must contain only -1/+1 values")
    bits01 = (kept.ravel() > 0).astype(np.uint8)

    flags = 0
    out = bytearray()
    width, height = cols * TILE_SIZE, rows * TILE_SIZE
    if entropy:
        flags |= FLAG_ENTROPY
    if height_map is not None:
        flags |= FLAG_SABR
    if extension is not None:
        flags |= FLAG_EXTENSION
    out += HEADER.pack(MAGIC, VERSION, flags, width, height, iterations)
    if extension is not None:
        out += extension.pack()

    if height_map is not None:
        compressor = zlib.compressobj(9, zlib.DEFLATED, -15)
        map_bytes = compressor.compress(height_map.counts.tobytes()) + compressor.flush()
        out += LENGTH.pack(len(map_bytes)) + map_bytes

    raw = _pack_raw(bits01)
    if entropy:
        coded = encode_bits(bits01, _contexts(iterations, keep), iterations * BINARIZER_DEPTH)
        if len(coded) < len(raw):
            payload = bytes([MODE_CODED]) + coded
        else:
            logger.info(
                f"Range coding did not shrink the payload ({len(coded)} >= {len(raw)} bytes); "
                f"storing raw bits"
            )
            payload = bytes([MODE_STORED]) + raw
    else:
        payload = raw
    out += LENGTH.pack(len(payload)) + payload
    return bytes(out)


def deserialize(data: bytes) -> DecodedStream:
    """Exact inverse of :func:`serialize`.

    Raises:
        BadMagicError: the data does not start with "RPC1"
        VersionMismatchError: unsupported container version
        TruncatedStreamError: a declared length runs past the end of the data
        CorruptStreamError: any other inconsistency
    """
    reader = _Reader(bytes(data))
    if len(data) >= len(MAGIC) and bytes(data[:len(MAGIC)]) != MAGIC:
        raise BadMagicError(f"bad magic {bytes(data[:len(MAGIC)])!r}, expected {MAGIC!r}")
    magic, version, flags, width, height, iterations = HEADER.unpack(
        reader.take(HEADER.size, "header")
    )
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"container version {version}, this build reads {VERSION}")
    if flags & ~KNOWN_FLAGS:
        raise CorruptStreamError(f"unknown flag bits 0x{flags:02x}")
    if width % TILE_SIZE or height % TILE_SIZE:
        raise CorruptStreamError(f"coded size {width}x{height} is not a multiple of {TILE_SIZE}")
    if iterations > MAX_ITERATIONS:
        raise CorruptStreamError(f"{iterations} iterations exceeds {MAX_ITERATIONS}")
    rows, cols = height // TILE_SIZE, width // TILE_SIZE

    extension = None
    if flags & FLAG_EXTENSION:
        extension = ContainerExtension.unpack(reader.take(EXTENSION.size, "extension block"))

    height_map = None
    if flags & FLAG_SABR:
        map_bytes = reader.length_prefixed("height map")
        height_map = _inflate_map(map_bytes, rows, cols, iterations)

    payload = reader.length_prefixed("payload")
    if reader.pos != len(data):
        raise CorruptStreamError(f"{len(data) - reader.pos} trailing bytes after payload")

    keep = _keep_mask(iterations, rows, cols, height_map)
    n_bits = int(keep.sum()) * BINARIZER_DEPTH
    bits01 = _decode_payload(payload, bool(flags & FLAG_ENTROPY), n_bits, iterations, keep)

    bits = np.zeros((iterations, rows, cols, BINARIZER_DEPTH), dtype=np.int8)
    bits[keep] = (bits01.astype(np.int8) * 2 - 1).reshape(-1, BINARIZER_DEPTH)
    return DecodedStream(CodeTensor(bits), height_map, width, height,
                         bool(flags & FLAG_ENTROPY), extension)


def _inflate_map(map_bytes: bytes, rows: int, cols: int, iterations: int) -> HeightMap:
    try:
        inflater = zlib.decompressobj(-15)
        raw = inflater.decompress(map_bytes, rows * cols + 1)
        complete = inflater.eof
    except zlib.error as e:
        raise CorruptStreamError(f"height map is not valid DEFLATE data: {e}") from e
    if not complete or len(raw) != rows * cols:
        raise CorruptStreamError(f"height map holds {len(raw)} entries, expected {rows * cols}")
    counts = np.frombuffer(raw, dtype=np.uint8).reshape(rows, cols)
    if counts.max(initial=0) > iterations:
        raise CorruptStreamError("height map entry exceeds the stream's iteration count")
    return HeightMap(counts.copy())


def _decode_payload(payload: bytes, entropy: bool, n_bits: int, iterations: int,
                    keep: np.ndarray) -> np.ndarray:
    raw_len = (n_bits + 7) // 8
    if entropy:
        if not payload:
            raise TruncatedStreamError("entropy payload is missing its mode byte")
        mode, body = payload[0], payload[1:]
        if mode == MODE_CODED:
            return decode_bits(body, _contexts(iterations, keep), iterations * BINARIZER_DEPTH)
        if mode != MODE_STORED:
            raise CorruptStreamError(f"unknown payload mode {mode}")
        payload = body
    if len(payload) < raw_len:
        raise TruncatedStreamError(f"payload holds {len(payload)} bytes, {raw_len} needed")
    if len(payload) > raw_len:
        raise CorruptStreamError(f"payload holds {len(payload)} bytes, {raw_len} expected")
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=n_bits, bitorder="big")


def measured_bpp(data: Union[bytes, int], width: int, height: int) -> float:
    """8 * bytes / (width * height)."""
    if width * height <= 0:
        raise ValueError(f"measured_bpp: zero-area image {width}x{height}")
    n = data if isinstance(data, int) else len(data)
    return 8.0 * n / (width * height)


def height_map_bytes(data: bytes) -> int:
    """Size of the compressed height map inside a container, 0 when absent."""
    _, _, flags, _, _, _ = HEADER.unpack(data[:HEADER.size])
    if not flags & FLAG_SABR:
        return 0
    offset = HEADER.size + (EXTENSION.size if flags & FLAG_EXTENSION else 0)
    (n,) = LENGTH.unpack(data[offset:offset + LENGTH.size])
    return n

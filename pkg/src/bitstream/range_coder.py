"""
Adaptive Binary Range Coder - Recurrent Priming Codec

32-bit renormalizing range coder with carry propagation through a cached
byte (the LZMA construction), driven by Laplace-smoothed bit counts per
context. Integer-only, so the byte output is identical on every platform.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.errors import TruncatedStreamError

PROB_BITS = 16
PROB_ONE = 1 << PROB_BITS
TOP = 1 << 24
MASK32 = 0xFFFFFFFF


@dataclass
class CoderContext:
    """Adaptive count of ones among the bits seen in one context."""
    ones: int = 0
    total: int = 0

    def p_one(self) -> float:
        return (self.ones + 1) / (self.total + 2)

    def p_zero_scaled(self) -> int:
        """P(bit = 0) in 1/65536 units, kept inside [1, 65535]."""
        p0 = ((self.total - self.ones + 1) << PROB_BITS) // (self.total + 2)
        return min(max(p0, 1), PROB_ONE - 1)

    def update(self, bit: int) -> None:
        self.ones += bit
        self.total += 1


class RangeEncoder:
    """Range encoder writing to an in-memory byte buffer."""

    def __init__(self):
        self.low = 0
        self.range = MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, bit: int, p_zero: int) -> None:
        bound = (self.range >> PROB_BITS) * p_zero
        if bit:
            self.low += bound
            self.range -= bound
        else:
            self.range = bound
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def _shift_low(self) -> None:
        if self.low < 0xFF000000 or self.low > MASK32:
            carry = self.low >> 32
            temp = self.cache
            while True:
                self.out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if self.cache_size == 0:
                    break
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    """Inverse of :class:`RangeEncoder`; never reads past the given buffer."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.range = MASK32
        self.code = 0
        for _ in range(5):
            self.code = ((self.code << 8) | self._next_byte()) & MASK32

    def _next_byte(self) -> int:
        if self.pos >= len(self.data):
            raise TruncatedStreamError("arithmetic-coded payload ended early")
        byte = self.data[self.pos]
        self.pos += 1
        return byte

    def decode(self, p_zero: int) -> int:
        bound = (self.range >> PROB_BITS) * p_zero
        if self.code < bound:
            self.range = bound
            bit = 0
        else:
            self.code -= bound
            self.range -= bound
            bit = 1
        while self.range < TOP:
            self.range <<= 8
            self.code = ((self.code << 8) | self._next_byte()) & MASK32
        return bit


def encode_bits(bits: Sequence[int], contexts: Sequence[int], n_contexts: int) -> bytes:
    """Arithmetic-code a bit sequence, each bit under its own adaptive context.

    Args:
        bits: 0/1 values
        contexts: Context index for every bit
        n_contexts: Number of distinct contexts

    Returns:
        Coded bytes
    """
    models: List[CoderContext] = [CoderContext() for _ in range(n_contexts)]
    encoder = RangeEncoder()
    for bit, ctx in zip(_as_list(bits), _as_list(contexts)):
        model = models[ctx]
        encoder.encode(bit, model.p_zero_scaled())
        model.update(bit)
    return encoder.finish()


def decode_bits(data: bytes, contexts: Sequence[int], n_contexts: int) -> np.ndarray:
    """Decode ``len(contexts)`` bits produced by :func:`encode_bits`."""
    models: List[CoderContext] = [CoderContext() for _ in range(n_contexts)]
    decoder = RangeDecoder(data)
    out = np.empty(len(contexts), dtype=np.uint8)
    for i, ctx in enumerate(_as_list(contexts)):
        model = models[ctx]
        bit = decoder.decode(model.p_zero_scaled())
        model.update(bit)
        out[i] = bit
    return out


def _as_list(values: Sequence[int]) -> List[int]:
    if isinstance(values, np.ndarray):
        return values.tolist()
    return list(values)

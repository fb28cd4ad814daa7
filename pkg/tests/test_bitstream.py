"""Range coder and the RPC1 container."""

import math
import zlib

import numpy as np
import pytest

from src.bitstream import (
    ContainerExtension, HEADER, LENGTH, MAGIC, decode_bits, deserialize, encode_bits,
    height_map_bytes, measured_bpp, serialize,
)
from src.bitstream.range_coder import CoderContext
from src.codec import CodeTensor
from src.errors import (
    BadMagicError, CorruptStreamError, ShapeError, TruncatedStreamError, VersionMismatchError,
)
from src.sabr import HeightMap, apply_mask


def _random_codes(rng, iterations, rows, cols, p_one=0.5):
    bits = np.where(rng.uniform(size=(iterations, rows, cols, 32)) < p_one, 1, -1)
    return CodeTensor(bits)


def _binary_entropy(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


class TestRangeCoder:

    def test_round_trip_with_contexts(self):
        rng = np.random.default_rng(0)
        bits = (rng.uniform(size=5000) < 0.3).astype(np.uint8)
        contexts = rng.integers(0, 7, size=5000)
        data = encode_bits(bits, contexts, 7)
        np.testing.assert_array_equal(decode_bits(data, contexts, 7), bits)

    def test_degenerate_sequences(self):
        for bits in ([], [0] * 3000, [1] * 3000, [0, 1] * 1500):
            contexts = [0] * len(bits)
            data = encode_bits(bits, contexts, 1)
            np.testing.assert_array_equal(decode_bits(data, contexts, 1), bits)

    def test_output_is_deterministic(self):
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, size=2000)
        contexts = np.zeros(2000, dtype=np.int64)
        assert encode_bits(bits, contexts, 1) == encode_bits(bits.tolist(), contexts.tolist(), 1)

    def test_empty_input_is_truncated(self):
        with pytest.raises(TruncatedStreamError):
            decode_bits(b"", [0], 1)

    def test_laplace_estimate(self):
        ctx = CoderContext()
        assert ctx.p_one() == 0.5
        for bit in (1, 1, 0):
            ctx.update(bit)
        assert ctx.p_one() == pytest.approx(3 / 5)
        assert 1 <= ctx.p_zero_scaled() <= 65535

    def test_probability_stays_inside_open_interval(self):
        ctx = CoderContext(ones=10 ** 7, total=10 ** 7)
        assert ctx.p_zero_scaled() == 1
        ctx = CoderContext(ones=0, total=10 ** 7)
        assert ctx.p_zero_scaled() == 65535

    @pytest.mark.slow
    def test_lossless_on_a_million_bits(self):
        rng = np.random.default_rng(2)
        n = 10 ** 6
        bits = (rng.uniform(size=n) < 0.2).astype(np.uint8)
        contexts = rng.integers(0, 512, size=n)
        data = encode_bits(bits, contexts, 512)
        np.testing.assert_array_equal(decode_bits(data, contexts, 512), bits)


class TestContainerLayout:

    def test_raw_payload_size(self):
        codes = _random_codes(np.random.default_rng(3), 2, 2, 2)
        data = serialize(codes)
        header = HEADER.size + LENGTH.size
        assert HEADER.size == 15
        assert len(data) - header == 2 * 2 * 2 * 32 // 8

    def test_header_fields(self):
        codes = _random_codes(np.random.default_rng(4), 3, 2, 5)
        data = serialize(codes, entropy=True)
        magic, version, flags, width, height, iterations = HEADER.unpack(data[:HEADER.size])
        assert (magic, version, flags) == (MAGIC, 1, 0x01)
        assert (width, height, iterations) == (80, 32, 3)

    def test_raw_bit_order(self):
        bits = -np.ones((1, 1, 1, 32), dtype=np.int8)
        bits[0, 0, 0, 0] = 1
        bits[0, 0, 0, 9] = 1
        data = serialize(CodeTensor(bits))
        payload = data[HEADER.size + LENGTH.size:]
        assert payload == bytes([0b10000000, 0b01000000, 0, 0])

    def test_sabr_block(self):
        rng = np.random.default_rng(5)
        codes = _random_codes(rng, 4, 2, 3)
        height_map = HeightMap([[1, 4, 2], [0, 3, 4]])
        data = serialize(apply_mask(codes, height_map), height_map)
        _, _, flags, _, _, _ = HEADER.unpack(data[:HEADER.size])
        assert flags == 0x02
        (map_len,) = LENGTH.unpack(data[HEADER.size:HEADER.size + 4])
        assert height_map_bytes(data) == map_len
        raw_map = zlib.decompress(data[HEADER.size + 4:HEADER.size + 4 + map_len], -15)
        assert raw_map == bytes([1, 4, 2, 0, 3, 4])
        payload_len = len(data) - HEADER.size - 8 - map_len
        assert payload_len == height_map.total_iterations() * 32 // 8

    def test_no_map_means_zero_map_bytes(self):
        codes = _random_codes(np.random.default_rng(6), 1, 1, 1)
        assert height_map_bytes(serialize(codes)) == 0


class TestRoundTrip:

    @pytest.mark.parametrize("entropy", [False, True])
    def test_plain(self, entropy):
        codes = _random_codes(np.random.default_rng(7), 5, 3, 4, p_one=0.8)
        stream = deserialize(serialize(codes, entropy=entropy))
        assert stream.codes == codes
        assert stream.height_map is None
        assert stream.entropy is entropy
        assert (stream.width, stream.height) == (64, 48)

    @pytest.mark.parametrize("entropy", [False, True])
    def test_masked_stacks_come_back_zero_filled(self, entropy):
        rng = np.random.default_rng(8)
        codes = _random_codes(rng, 6, 3, 3)
        height_map = HeightMap(rng.integers(0, 7, size=(3, 3)))
        masked = apply_mask(codes, height_map)
        stream = deserialize(serialize(masked, height_map, entropy))
        assert stream.codes == masked
        assert stream.height_map == height_map

    def test_extension_block(self):
        codes = _random_codes(np.random.default_rng(9), 2, 1, 2)
        ext = ContainerExtension(crop_width=30, crop_height=11, k_prime=3, k_diffuse=1,
                                 digest="0123456789abcdef")
        stream = deserialize(serialize(codes, entropy=True, extension=ext))
        assert stream.extension == ext
        assert stream.codes == codes

    def test_zero_iterations(self):
        codes = CodeTensor(np.zeros((0, 2, 2, 32)))
        stream = deserialize(serialize(codes))
        assert stream.codes.iterations == 0
        assert (stream.width, stream.height) == (32, 32)

    def _fuzz(self, cases, seed):
        rng = np.random.default_rng(seed)
        for _ in range(cases):
            iterations = int(rng.integers(0, 5))
            rows, cols = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            codes = _random_codes(rng, iterations, rows, cols, p_one=rng.uniform(0.05, 0.95))
            height_map = None
            if iterations and rng.uniform() < 0.5:
                height_map = HeightMap(rng.integers(0, iterations + 1, size=(rows, cols)))
                codes = apply_mask(codes, height_map)
            ext = None
            if rng.uniform() < 0.3:
                ext = ContainerExtension(int(rng.integers(1, 16 * cols + 1)),
                                         int(rng.integers(1, 16 * rows + 1)))
            data = serialize(codes, height_map, bool(rng.integers(2)), ext)
            stream = deserialize(data)
            assert stream.codes == codes
            assert stream.height_map == height_map
            assert stream.extension == ext
            assert serialize(stream.codes, stream.height_map, stream.entropy, ext) == data

    def test_fuzz(self):
        self._fuzz(300, seed=10)

    @pytest.mark.slow
    def test_fuzz_long(self):
        self._fuzz(10 ** 4, seed=11)


class TestEntropyLayer:

    def test_biased_bits_approach_shannon_bound(self):
        rng = np.random.default_rng(12)
        codes = _random_codes(rng, 1, 56, 56, p_one=0.9)
        n_bits = codes.bits.size
        assert n_bits >= 10 ** 5
        data = serialize(codes, entropy=True)
        bits_per_bit = 8 * len(data) / n_bits
        assert bits_per_bit <= 1.05 * _binary_entropy(0.9)

    def test_incompressible_bits_cost_at_most_one_byte(self):
        rng = np.random.default_rng(13)
        codes = _random_codes(rng, 2, 10, 16)
        assert codes.bits.size >= 10 ** 4
        raw = serialize(codes)
        coded = serialize(codes, entropy=True)
        assert len(coded) <= len(raw) + 1
        assert deserialize(coded).codes == codes

    def test_skewed_codes_shrink(self):
        codes = _random_codes(np.random.default_rng(14), 4, 4, 4, p_one=0.97)
        assert len(serialize(codes, entropy=True)) < len(serialize(codes)) // 2


class TestErrors:

    def _data(self):
        return serialize(_random_codes(np.random.default_rng(15), 2, 2, 2), entropy=True)

    def test_bad_magic(self):
        data = self._data()
        with pytest.raises(BadMagicError):
            deserialize(b"XPC1" + data[4:])

    def test_version_mismatch(self):
        data = bytearray(self._data())
        data[4] = 2
        with pytest.raises(VersionMismatchError):
            deserialize(bytes(data))

    def test_every_truncation_is_detected(self):
        data = self._data()
        for cut in range(len(data)):
            with pytest.raises(CorruptStreamError):
                deserialize(data[:cut])

    def test_truncated_payload_kind(self):
        data = serialize(_random_codes(np.random.default_rng(16), 2, 2, 2))
        with pytest.raises(TruncatedStreamError):
            deserialize(data[:-1])

    def test_trailing_bytes(self):
        with pytest.raises(CorruptStreamError):
            deserialize(self._data() + b"\x00")

    def test_unknown_flags(self):
        data = bytearray(self._data())
        data[5] |= 0x80
        with pytest.raises(CorruptStreamError):
            deserialize(bytes(data))

    def test_map_grid_mismatch(self):
        codes = _random_codes(np.random.default_rng(17), 2, 2, 2)
        with pytest.raises(ShapeError):
            serialize(codes, HeightMap(np.ones((2, 3))))
        with pytest.raises(ShapeError):
            serialize(codes, HeightMap(np.full((2, 2), 3)))

    def test_absent_bits_need_a_map(self):
        codes = _random_codes(np.random.default_rng(18), 2, 1, 1)
        bits = codes.bits.copy()
        bits[1] = 0
        with pytest.raises(ValueError):
            serialize(CodeTensor(bits))


class TestMeasuredRate:

    def test_formula(self):
        assert measured_bpp(47, 32, 32) == pytest.approx(8 * 47 / 1024)
        assert measured_bpp(b"\x00" * 47, 32, 32) == measured_bpp(47, 32, 32)

    def test_monotone_in_length(self):
        rates = [measured_bpp(n, 48, 32) for n in range(0, 100, 7)]
        assert rates == sorted(rates)

    def test_zero_area(self):
        with pytest.raises(ValueError):
            measured_bpp(10, 0, 32)

import numpy as np
import pytest

from neurocodec.errors import BudgetError, FormatError
from neurocodec.spiht import (
    BitReader,
    BitWriter,
    Bitstream,
    decode,
    dequantize,
    encode,
    quantize,
)
from neurocodec.wavelet import dwt1d, dwt2d


def _random_pyramid(shape, seed, span=3000, levels=3):
    rng = np.random.default_rng(seed)
    if isinstance(shape, int):
        pyr = dwt1d(np.zeros(shape), levels)
    else:
        pyr = dwt2d(np.zeros(shape), levels)
    for band in pyr.bands():
        band[...] = rng.integers(-span, span + 1, size=band.shape)
    return pyr


def _bands_equal(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a.bands(), b.bands()))


def _pyr_mse(a, b):
    num = sum(float(np.sum((x - y) ** 2)) for x, y in zip(a.bands(), b.bands()))
    den = sum(x.size for x in a.bands())
    return num / den


class TestBitstream:
    def test_writer_reader_round_trip(self):
        w = BitWriter(64)
        pattern = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1]
        for b in pattern:
            w.write(b)
        w.write_uint(0xAB, 8)
        stream = w.finish()
        assert stream.length_bits == len(pattern) + 8
        r = BitReader(stream)
        assert [r.read() for _ in pattern] == pattern
        assert r.read_uint(8) == 0xAB

    def test_msb_first_packing(self):
        w = BitWriter(16)
        w.write_uint(0b10110010, 8)
        assert w.finish().data == bytes([0b10110010])

    def test_prefix_zeroes_padding(self):
        s = Bitstream(bytes([0xFF, 0xFF]), 16)
        p = s.prefix(5)
        assert p.length_bits == 5
        assert p.data == bytes([0b11111000])


class TestQuantize:
    def test_scale_formula(self):
        pyr = dwt1d(np.zeros(64), 2)
        pyr.approx[0] = 100.0
        _, scale = quantize(pyr, 16)
        assert scale == pytest.approx(100.0 / 32767)

    def test_all_zero(self):
        ints, scale = quantize(dwt1d(np.zeros(64), 2), 16)
        assert scale == 0.0
        assert all(np.all(b == 0) for b in ints.bands())

    @pytest.mark.parametrize("bits", [8, 12, 16])
    def test_dequantize_error_bound(self, bits):
        rng = np.random.default_rng(bits)
        pyr = dwt1d(rng.normal(size=512) * 75, 4)
        ints, scale = quantize(pyr, bits)
        back = dequantize(ints, scale)
        for orig, rec in zip(pyr.bands(), back.bands()):
            assert np.max(np.abs(orig - rec)) <= scale / 2 + 1e-12

    def test_precision_out_of_range(self):
        with pytest.raises(ValueError):
            quantize(dwt1d(np.zeros(64), 2), 30)


class TestEncode:
    def test_zero_pyramid_decodes_to_zeros(self):
        pyr = dwt2d(np.zeros((16, 16)), 3)
        bits = encode(pyr, 10_000)
        assert bits.length_bits == 8  # just the plane-count byte
        out = decode(bits, (16, 16), 3)
        assert all(np.all(b == 0) for b in out.bands())

    def test_single_coefficient_plane_count(self):
        # magnitude 9 first turns significant in plane 3 (2^3 <= 9 < 2^4)
        pyr = dwt2d(np.zeros((8, 8)), 3)
        pyr.approx[0, 0] = 9.0
        bits = encode(pyr, 10_000)
        assert bits.data[0] == 4

    def test_budget_too_small(self):
        with pytest.raises(BudgetError):
            encode(dwt1d(np.zeros(64), 2), 8)

    @pytest.mark.parametrize("shape", [64, 37, (16, 16), (23, 40)])
    def test_lossless_round_trip(self, shape):
        pyr = _random_pyramid(shape, seed=hash(str(shape)) % 2**32)
        bits = encode(pyr, 10**8, check_invariants=True)
        out = decode(bits, shape, 3)
        assert _bands_equal(pyr, out)

    def test_budget_exactness(self):
        pyr = _random_pyramid((16, 16), seed=1)
        for budget in (100, 500, 1777, 4096):
            bits = encode(pyr, budget)
            assert bits.length_bits <= budget
            if bits.length_bits < budget:
                # early stop only on lossless completion
                assert _bands_equal(decode(bits, (16, 16), 3), pyr)
            else:
                assert bits.length_bits == budget

    def test_deterministic(self):
        pyr = _random_pyramid((16, 16), seed=2)
        assert encode(pyr, 3000).data == encode(pyr, 3000).data


class TestDecode:
    def test_empty_stream_is_zero_pyramid(self):
        out = decode(Bitstream(b"", 0), (8, 8), 3)
        assert all(np.all(b == 0) for b in out.bands())

    def test_prefix_mse_non_increasing(self):
        pyr = _random_pyramid((16, 16), seed=3)
        full = encode(pyr, 10**7)
        lengths = np.linspace(64, full.length_bits, 10).astype(int)
        mses = [_pyr_mse(pyr, decode(full.prefix(int(k)), (16, 16), 3)) for k in lengths]
        for earlier, later in zip(mses, mses[1:]):
            assert later <= earlier + 1e-12

    def test_implausible_plane_count(self):
        w = BitWriter(64)
        w.write_uint(200, 8)
        with pytest.raises(FormatError):
            decode(w.finish(), (8, 8), 3)

    def test_truncation_is_best_effort(self):
        pyr = _random_pyramid(256, seed=4, levels=4)
        full = encode(pyr, 10**7)
        partial = decode(full.prefix(full.length_bits // 3), 256, 4)
        assert _pyr_mse(pyr, partial) < _pyr_mse(pyr, decode(Bitstream(b"", 0), 256, 4))

    def test_mid_rise_offset(self):
        # value 12 = 0b1100 cut after planes 3 and 2 reconstructs 12 + 2^1
        pyr = dwt1d(np.zeros(64), 2)
        pyr.approx[0] = 12.0
        stats = {}
        full = encode(pyr, 10**6, stats=stats)
        cut = decode(full.prefix(stats["plane_end_bits"][1]), 64, 2)
        assert cut.approx[0] == 12 + 2


class TestControlPathMirror:
    def test_reencoding_decoded_matches_prefix(self):
        pyr = _random_pyramid((16, 32), seed=5)
        for budget in (300, 900, 2500):
            st_e, st_d = {}, {}
            first = encode(pyr, budget, stats=st_e)
            decoded = decode(first, (16, 32), 3, stats=st_d)
            second = encode(decoded, budget)
            passes = st_d["planes_completed"]
            if passes == 0:
                continue
            cut = st_e["plane_end_bits"][passes - 1]
            assert first.prefix(cut).data == second.prefix(cut).data

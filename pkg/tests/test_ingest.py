import numpy as np
import pytest

from neurocodec.errors import FormatError, RangeError, StructureError
from neurocodec.ingest import (
    FlagSection,
    Recording,
    SignalMatrix,
    read_edf,
    read_flags,
    read_raw,
    slice_recording,
    write_edf,
    write_raw,
)


def _recording(n_channels=3, n_samples=1024, fs=256, seed=0):
    rng = np.random.default_rng(seed)
    ints = rng.integers(-2000, 2000, size=(n_channels, n_samples))
    data = ints * 0.153
    labels = [f"ch{i:02d}" for i in range(n_channels)]
    return Recording("pt01", labels, fs, SignalMatrix(data))


class TestRawFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rec = _recording()
        path = tmp_path / "a.ncr"
        write_raw(path, rec, gain=0.153)
        back = read_raw(path)
        assert back.fs == rec.fs
        assert back.precision_bits == 16
        np.testing.assert_array_equal(back.samples.data, rec.samples.data)

    def test_auto_gain_round_trips_full_scale_grid(self, tmp_path):
        # auto gain is max/32767, exact when the data peaks at full scale
        quantum = 7.25e-3
        ints = np.array([[32767, -15, 0, 450, -32767, 8],
                         [5, 17, -32000, 9, 2, -1]])
        data = ints * quantum
        rec = Recording("p", ["a", "b"], 128, SignalMatrix(data))
        path = tmp_path / "b.ncr"
        write_raw(path, rec)
        np.testing.assert_allclose(read_raw(path).samples.data, data, rtol=0, atol=1e-15)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.ncr"
        path.write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(FormatError):
            read_raw(path)

    def test_truncated_samples(self, tmp_path):
        rec = _recording()
        path = tmp_path / "d.ncr"
        write_raw(path, rec)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(StructureError):
            read_raw(path)


class TestEdf:
    def test_hour_long_chb_shape(self, tmp_path):
        # 23 channels, 3600 s at 256 Hz -> 921600 samples per channel
        data = np.zeros((23, 3600 * 256))
        data[:, :100] = np.arange(100) * 0.5
        rec = Recording("chb01", [f"c{i}" for i in range(23)], 256, SignalMatrix(data))
        path = tmp_path / "long.edf"
        write_edf(path, rec)
        back = read_edf(path)
        assert back.samples.n_samples == 921600
        assert back.fs == 256
        assert back.precision_bits == 16

    def test_calibration_round_trip(self, tmp_path):
        rec = _recording(4, 512)
        path = tmp_path / "cal.edf"
        write_edf(path, rec)
        back = read_edf(path)
        assert back.channels == rec.channels
        peak = np.abs(rec.samples.data).max()
        np.testing.assert_allclose(back.samples.data, rec.samples.data,
                                   atol=peak / 32000, rtol=0)

    def test_truncated_data_record(self, tmp_path):
        rec = _recording(2, 512)
        path = tmp_path / "trunc.edf"
        write_edf(path, rec)
        blob = path.read_bytes()
        path.write_bytes(blob[:-100])
        with pytest.raises(StructureError):
            read_edf(path)

    def test_mixed_rates_rejected(self, tmp_path):
        rec = _recording(2, 512)
        path = tmp_path / "mixed.edf"
        write_edf(path, rec)
        blob = bytearray(path.read_bytes())
        # samples-per-record block starts at 256 + 216 * n_signals
        off = 256 + 216 * 2 + 8
        blob[off: off + 8] = b"128     "
        path.write_bytes(bytes(blob))
        with pytest.raises(StructureError):
            read_edf(path)


class TestSlice:
    def test_identity(self):
        rec = _recording()
        out = slice_recording(rec, 0, rec.duration_s)
        np.testing.assert_array_equal(out.data, rec.samples.data)

    def test_sample_count(self):
        rec = _recording(2, 256 * 20)
        out = slice_recording(rec, 10, 4)
        assert out.n_samples == 1024

    def test_out_of_range(self):
        rec = _recording()
        with pytest.raises(RangeError):
            slice_recording(rec, rec.duration_s, 1)

    def test_composition(self):
        rec = _recording(2, 256 * 16)
        a, c, d = 2.0, 1.5, 0.5
        inner = slice_recording(rec, a, 8.0)
        nested = Recording("x", rec.channels, rec.fs, inner)
        left = slice_recording(nested, c, d)
        right = slice_recording(rec, a + c, d)
        np.testing.assert_array_equal(left.data, right.data)


class TestFlags:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.flags"
        path.write_text("")
        assert read_flags(path) == []

    def test_two_sections_sorted(self, tmp_path):
        path = tmp_path / "two.flags"
        path.write_text("200 300 sz\n10 80 sz\n")
        flags = read_flags(path)
        assert [(f.start_s, f.end_s) for f in flags] == [(10, 80), (200, 300)]

    def test_reversed_bounds(self, tmp_path):
        path = tmp_path / "bad.flags"
        path.write_text("80 10 sz\n")
        with pytest.raises(FormatError):
            read_flags(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "nan.flags"
        path.write_text("abc 10 sz\n")
        with pytest.raises(FormatError):
            read_flags(path)

    def test_overlap_helper(self):
        a = FlagSection(0, 100, "x")
        assert a.overlap_s(FlagSection(40, 260, "y")) == 60
        assert a.overlap_s(FlagSection(100, 150, "y")) == 0


class TestSignalMatrix:
    def test_rejects_nonfinite(self):
        with pytest.raises(StructureError):
            SignalMatrix(np.array([[1.0, np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(StructureError):
            SignalMatrix(np.zeros((0, 4)))

    def test_vector_promoted(self):
        m = SignalMatrix(np.arange(5.0))
        assert m.n_channels == 1 and m.n_samples == 5

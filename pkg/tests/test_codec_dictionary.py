import numpy as np
import pytest

import oracles
from conftest import smooth_eeg
from neurocodec import codec_spiht2d, metrics
from neurocodec.codec_dictionary import (
    ReferenceList,
    burst_band_energy,
    compress,
    decompress,
    encode_segment,
    flag_seizure_like,
    read_flag_sections,
    segment_features,
    MODE_LIT,
    MODE_REF,
)
from neurocodec.errors import SizeError
from neurocodec.wavelet import dwt1d


def _tone(freq, n=1024, fs=256.0, amp=1.0):
    t = np.arange(n) / fs
    return amp * np.sin(2 * np.pi * freq * t)


class TestFeatures:
    def test_alpha_tone(self):
        feats = segment_features(dwt1d(_tone(10.0), 5), 256.0)
        assert feats is not None
        assert np.argmax(feats) == 2  # alpha slot
        # FFT oracle: 8-16 Hz band dominates all other dyadic bands
        x = _tone(10.0)
        alpha_power = oracles.fft_band_power(x, 256.0, 8, 16)
        rest = oracles.fft_band_power(x, 256.0, 0, 8) + oracles.fft_band_power(x, 256.0, 16, 128)
        assert alpha_power > rest

    def test_zero_segment_null(self):
        assert segment_features(dwt1d(np.zeros(1024), 5), 256.0) is None

    def test_scale_invariance(self):
        a = segment_features(dwt1d(_tone(7.0), 5), 256.0)
        b = segment_features(dwt1d(7.0 * _tone(7.0), 5), 256.0)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unit_sum(self):
        feats = segment_features(dwt1d(_tone(4.7) + _tone(21.0), 5), 256.0)
        assert feats.sum() == pytest.approx(1.0)


class TestMatch:
    def _list_with(self, feature_rows):
        ref = ReferenceList(capacity=8)
        for feats in feature_rows:
            pyr = dwt1d(np.ones(1024), 5)
            ref.insert(pyr, np.asarray(feats, dtype=float))
        return ref

    def test_own_features_distance_zero(self):
        f = np.array([0.5, 0.3, 0.1, 0.05, 0.05])
        ref = self._list_with([f])
        assert ref.match(f, 0.15).entry_id == 0

    def test_empty_list(self):
        assert ReferenceList().match(np.ones(5) / 5, 0.5) is None

    def test_null_features_never_match(self):
        ref = self._list_with([np.ones(5) / 5])
        assert ref.match(None, 1.0) is None

    def test_nearest_of_two(self):
        target = np.array([0.2, 0.2, 0.2, 0.2, 0.2])
        near = target + np.array([0.05, -0.05, 0, 0, 0]) / np.sqrt(2)   # dist 0.05
        far = target + np.array([0.08, -0.08, 0, 0, 0]) / np.sqrt(2)    # dist 0.08
        ref = self._list_with([far, near])
        # oracle: exhaustive scan
        dists = [float(np.linalg.norm(e.features - target)) for e in ref.entries]
        assert dists[1] < dists[0] <= 0.1
        assert ref.match(target, 0.1).entry_id == 1

    def test_threshold_excludes(self):
        f = np.array([0.5, 0.3, 0.1, 0.05, 0.05])
        ref = self._list_with([f + 0.2])
        assert ref.match(f, 0.05) is None


class TestEncodeSegment:
    def test_first_segment_is_literal(self):
        ref = ReferenceList(capacity=4)
        mode, _, _, _, _ = encode_segment(_tone(9.0, amp=30), ref, 4096, fs=256.0)
        assert mode == MODE_LIT
        assert len(ref.entries) == 1

    def test_repeat_segment_is_ref_and_cheap(self):
        # both streams are embedded: compare the shortest prefixes reaching 1% PRD
        from neurocodec import spiht
        from neurocodec.wavelet import idwt1d

        seg = _tone(9.0, amp=30)
        ref = ReferenceList(capacity=4)
        m1, *_ = encode_segment(seg, ref, 60_000, fs=256.0)
        m2, rid, _, _, recon2 = encode_segment(seg, ref, 60_000, fs=256.0)
        assert (m1, m2, rid) == (MODE_LIT, MODE_REF, 0)
        assert metrics.prd(seg, idwt1d(recon2)) < 1.0

        pyr = dwt1d(seg, 5)
        entry_pyr = ref.entries[0].pyramid
        cases = {"lit": (pyr, None), "ref": (pyr - entry_pyr, entry_pyr)}
        needed = {}
        for name, (target, base) in cases.items():
            ints, scale = spiht.quantize(target, 16)
            stream = spiht.encode(ints, 60_000)
            for k in range(8, stream.length_bits + 64, 64):
                dec = spiht.dequantize(spiht.decode(stream.prefix(k), 1024, 5), scale)
                out = dec if base is None else base + dec
                if metrics.prd(seg, idwt1d(out)) <= 1.0:
                    needed[name] = k
                    break
        assert needed["ref"] <= 0.25 * needed["lit"]

    def test_lru_eviction(self):
        ref = ReferenceList(capacity=1)
        encode_segment(_tone(9.0, amp=30), ref, 30_000, fs=256.0)
        assert [e.entry_id for e in ref.entries] == [0]
        encode_segment(_tone(25.0, amp=30), ref, 30_000, fs=256.0)
        assert [e.entry_id for e in ref.entries] == [1]

    def test_use_counters_update(self):
        seg = _tone(9.0, amp=30)
        ref = ReferenceList(capacity=4)
        encode_segment(seg, ref, 30_000, fs=256.0)
        encode_segment(seg, ref, 30_000, fs=256.0)
        entry = ref.entries[0]
        assert entry.use_count == 1
        assert entry.last_used == 1


class TestFlagRule:
    def test_burst_flags(self):
        history = [1.0] * 30
        assert flag_seizure_like(history, 10.0, matched=False)

    def test_stationary_never_flags(self):
        history = [1.0] * 30
        assert not flag_seizure_like(history, 1.1, matched=False)

    def test_matched_burst_not_novel(self):
        history = [1.0] * 30
        assert not flag_seizure_like(history, 10.0, matched=True)

    def test_warmup(self):
        assert not flag_seizure_like([1.0] * 29, 10.0, matched=False)

    def test_rule_matches_direct_evaluation(self):
        rng = np.random.default_rng(0)
        history = list(rng.uniform(0.5, 1.5, size=40))
        current = 6.9
        expected = current > 5.0 * float(np.median(history[-30:]))
        assert flag_seizure_like(history, current, matched=False) == expected


class TestCodec:
    def test_periodic_beats_spiht2d(self):
        period = _tone(6.0, amp=40) + _tone(11.0, amp=15)
        x = np.stack([np.tile(period, 8) for _ in range(4)])
        x *= (1 + 0.02 * np.arange(4))[:, None]
        rec_d = compress(x, 2.0, fs=256)
        y_d = decompress(rec_d).data
        rec_s = codec_spiht2d.compress(x, 2.0, fs=256, levels=2)
        y_s = codec_spiht2d.decompress(rec_s).data
        assert metrics.prd(x, y_d) < metrics.prd(x, y_s)

    def test_zero_signal_exact(self):
        x = np.zeros((2, 3000))
        rec = compress(x, 2.0, fs=256)
        y = decompress(rec).data
        assert np.array_equal(y, x)

    def test_list_state_synchrony(self):
        x = smooth_eeg(3, 8192, seed=13)
        enc_trace, dec_trace = [], []
        rec = compress(x, 2.0, fs=256, capacity=4, list_trace=enc_trace)
        decompress(rec, list_trace=dec_trace)
        assert enc_trace == dec_trace

    def test_rate_monotonicity(self):
        x = smooth_eeg(2, 4096, seed=14)
        prd2 = metrics.prd(x, decompress(compress(x, 2.0, fs=256)).data)
        prd4 = metrics.prd(x, decompress(compress(x, 4.0, fs=256)).data)
        assert prd4 <= prd2

    def test_flag_sections_survive_container(self):
        fs = 256
        n = 1024 * 40
        t = np.arange(n) / fs
        x = 10.0 * np.sin(2 * np.pi * 5.0 * t)
        burst = slice(1024 * 34, 1024 * 36)
        x[burst] += 100.0 * np.sin(2 * np.pi * 12.0 * t[burst])
        rec = compress(x, 2.0, fs=fs)
        sections = read_flag_sections(rec)
        assert sections, "expected at least one seizure-like section"
        assert any(s.start_s <= 34 * 4 < s.end_s or abs(s.start_s - 136.0) < 8 for s in sections)

    def test_partial_final_epoch(self):
        x = smooth_eeg(2, 1500, seed=15)
        rec = compress(x, 4.0, fs=256)
        y = decompress(rec).data
        assert y.shape == x.shape

    def test_epoch_too_short(self):
        with pytest.raises(SizeError):
            compress(np.zeros((1, 64)), 2.0, epoch=16)

    def test_burst_statistic_positive(self):
        assert burst_band_energy(dwt1d(_tone(10.0), 5), 256.0) > 0

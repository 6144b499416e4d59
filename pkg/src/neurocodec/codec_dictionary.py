"""Method 2: per-channel segment coding against dynamic reference lists.

Each channel is cut into fixed-length epochs. An epoch's wavelet pyramid is
coded either literally (LIT) or as a residual against the closest reference
entry (REF), where closeness is the Euclidean distance between unit-sum
rhythm-band energy feature vectors. The decoder maintains an identical
reference list by construction: both sides insert the *decoded* literal
pyramid and derive the entry's features from it, so encoder and decoder
stay bit-synchronized through lossy coding.

A segment whose rhythm-band energy in the 3-30 Hz range jumps well above
the trailing median, and which matches no reference, is flagged as
seizure-like; flags ride along in the container side info using the flag
file text format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import container, spiht, wavelet
from .errors import SizeError, StructureError
from .ingest import FlagSection, SignalMatrix, as_signal_matrix, format_flags

DEFAULT_EPOCH = 1024          # 4 s at 256 Hz
DEFAULT_LEVELS = 5
DEFAULT_MATCH_THRESHOLD = 0.15
DEFAULT_CAPACITY = 64
DEFAULT_FLAG_RATIO = 5.0
DEFAULT_FLAG_WARMUP = 30

MODE_LIT = 0
MODE_REF = 1

_SEG_HEAD = struct.Struct("<BIdI")  # mode, ref id, quantizer scale, payload bit length


def segment_features(pyr: wavelet.WaveletPyramid1D, fs: float) -> np.ndarray | None:
    """Unit-sum rhythm-band feature vector of a pyramid; None if zero energy."""
    return wavelet.band_energies(pyr, fs).normalized()


def burst_band_energy(pyr: wavelet.WaveletPyramid1D, fs: float) -> float:
    """Unnormalized theta+alpha+beta energy, the 3-30 Hz burst statistic."""
    be = wavelet.band_energies(pyr, fs)
    return be.theta + be.alpha + be.beta


def flag_seizure_like(history: list[float], current: float, matched: bool,
                      ratio: float = DEFAULT_FLAG_RATIO,
                      warmup: int = DEFAULT_FLAG_WARMUP) -> bool:
    """Burst rule: unmatched activity whose 3-30 Hz energy exceeds
    ``ratio`` times the median of the trailing ``warmup`` segments."""
    if matched or len(history) < warmup:
        return False
    med = float(np.median(history[-warmup:]))
    return current > ratio * med


@dataclass
class ReferenceEntry:
    """One dictionary entry: a decoded pyramid plus its feature key."""

    entry_id: int
    pyramid: wavelet.WaveletPyramid1D
    features: np.ndarray          # unit-sum, never zero-energy
    use_count: int = 0
    last_used: int = 0


@dataclass
class ReferenceList:
    """Per-channel dynamic dictionary with LRU eviction."""

    capacity: int = DEFAULT_CAPACITY
    entries: list[ReferenceEntry] = field(default_factory=list)
    next_id: int = 0
    segment_counter: int = 0

    def match(self, features: np.ndarray | None, threshold: float) -> ReferenceEntry | None:
        """Closest entry by feature distance if within threshold, else None.

        Ties break toward the lower entry id.
        """
        if features is None or not self.entries:
            return None
        best = min(
            self.entries,
            key=lambda e: (float(np.linalg.norm(e.features - features)), e.entry_id),
        )
        if float(np.linalg.norm(best.features - features)) <= threshold:
            return best
        return None

    def get(self, entry_id: int) -> ReferenceEntry:
        for entry in self.entries:
            if entry.entry_id == entry_id:
                return entry
        raise StructureError(f"reference id {entry_id} not present in list")

    def touch(self, entry: ReferenceEntry) -> None:
        entry.use_count += 1
        entry.last_used = self.segment_counter

    def insert(self, pyramid: wavelet.WaveletPyramid1D, features: np.ndarray) -> ReferenceEntry:
        if len(self.entries) >= self.capacity:
            victim = min(self.entries, key=lambda e: (e.last_used, e.entry_id))
            self.entries.remove(victim)
        entry = ReferenceEntry(self.next_id, pyramid, features, 0, self.segment_counter)
        self.next_id += 1
        self.entries.append(entry)
        return entry

    def advance(self) -> None:
        self.segment_counter += 1

    def snapshot(self) -> tuple:
        """Hashable state trace: (id, use_count, last_used) per entry, in order."""
        return tuple((e.entry_id, e.use_count, e.last_used) for e in self.entries)


def _apply_decoded(mode: int, ref_id: int, decoded: wavelet.WaveletPyramid1D,
                   ref_list: ReferenceList, fs: float) -> wavelet.WaveletPyramid1D:
    """Shared encoder/decoder list update; returns the reconstructed pyramid.

    Keeping this path single guarantees reference-list synchrony.
    """
    if mode == MODE_REF:
        entry = ref_list.get(ref_id)
        recon = entry.pyramid + decoded
        ref_list.touch(entry)
    else:
        recon = decoded
        feats = segment_features(recon, fs)
        if feats is not None:
            ref_list.insert(recon.copy(), feats)
    ref_list.advance()
    return recon


def encode_segment(seg_data: np.ndarray, ref_list: ReferenceList, budget_bits: int, *,
                   fs: float, match_threshold: float = DEFAULT_MATCH_THRESHOLD,
                   levels: int = DEFAULT_LEVELS, precision_bits: int = 16):
    """Code one epoch against the list, updating it in place.

    Returns (mode, ref_id, scale, payload, reconstructed pyramid).
    """
    pyr = wavelet.dwt1d(seg_data, levels)
    return _encode_pyramid(pyr, ref_list, budget_bits, fs=fs,
                           match_threshold=match_threshold, precision_bits=precision_bits)


def _encode_pyramid(pyr: wavelet.WaveletPyramid1D, ref_list: ReferenceList, budget_bits: int, *,
                    fs: float, match_threshold: float, precision_bits: int):
    feats = segment_features(pyr, fs)
    entry = ref_list.match(feats, match_threshold)
    if entry is not None:
        mode, ref_id = MODE_REF, entry.entry_id
        target = pyr - entry.pyramid
    else:
        mode, ref_id = MODE_LIT, 0
        target = pyr
    ints, scale = spiht.quantize(target, precision_bits)
    payload = spiht.encode(ints, budget_bits)
    decoded = spiht.dequantize(
        spiht.decode(payload, pyr.original_len, pyr.levels), scale
    )
    recon = _apply_decoded(mode, ref_id, decoded, ref_list, fs)
    return mode, ref_id, scale, payload, recon


def _segment_spans(n_samples: int, epoch: int) -> list[tuple[int, int]]:
    return [(s, min(s + epoch, n_samples)) for s in range(0, n_samples, epoch)]


def _flag_sections(flags: list[bool], epoch: int, fs: float, channel: int) -> list[FlagSection]:
    sections = []
    start = None
    for j, on in enumerate([*flags, False]):
        if on and start is None:
            start = j
        elif not on and start is not None:
            sections.append(
                FlagSection(start * epoch / fs, j * epoch / fs, f"seizure-like ch{channel:02d}")
            )
            start = None
    return sections


def compress(signal, target_bps: float, *, fs: int = 256, epoch: int = DEFAULT_EPOCH,
             match_threshold: float = DEFAULT_MATCH_THRESHOLD, capacity: int = DEFAULT_CAPACITY,
             levels: int = DEFAULT_LEVELS, precision_bits: int = 16,
             flag_ratio: float = DEFAULT_FLAG_RATIO, flag_warmup: int = DEFAULT_FLAG_WARMUP,
             list_trace: list | None = None) -> container.CompressedRecord:
    """Compress channels independently against per-channel reference lists.

    The per-segment payload budget is floor(target_bps * epoch) bits. Pass a
    list as ``list_trace`` to capture (channel, segment, snapshot) tuples
    after every segment (used by the synchrony tests).
    """
    if not 0 < target_bps <= 16:
        raise ValueError(f"target_bps must be in (0, 16], got {target_bps}")
    if epoch < 2 ** levels:
        raise SizeError(f"epoch of {epoch} samples too short for {levels} levels")
    x = as_signal_matrix(signal)
    budget = int(target_bps * epoch)
    spans = _segment_spans(x.n_samples, epoch)

    seg_records = []
    payload_parts = []
    flag_sections: list[FlagSection] = []
    first_scale = 0.0
    for ch in range(x.n_channels):
        ref_list = ReferenceList(capacity=capacity)
        history: list[float] = []
        flags: list[bool] = []
        for j, (lo, hi) in enumerate(spans):
            seg = np.zeros(epoch)
            seg[: hi - lo] = x.data[ch, lo:hi]
            pyr = wavelet.dwt1d(seg, levels)
            mode, ref_id, scale, payload, _ = _encode_pyramid(
                pyr, ref_list, budget, fs=fs, match_threshold=match_threshold,
                precision_bits=precision_bits,
            )
            if ch == 0 and j == 0:
                first_scale = scale
            energy = burst_band_energy(pyr, fs)
            flags.append(flag_seizure_like(
                history, energy, mode == MODE_REF, flag_ratio, flag_warmup
            ))
            history.append(energy)
            seg_records.append(_SEG_HEAD.pack(mode, ref_id, scale, payload.length_bits))
            payload_parts.append(payload.data)
            if list_trace is not None:
                list_trace.append((ch, j, ref_list.snapshot()))
        flag_sections.extend(_flag_sections(flags, epoch, fs, ch))

    flag_text = format_flags(flag_sections).encode("utf-8")
    side = (
        struct.pack("<IIHBI", epoch, len(spans), levels, precision_bits, capacity)
        + struct.pack("<I", len(flag_text)) + flag_text
        + b"".join(seg_records)
    )
    payload_bytes = b"".join(payload_parts)
    return container.CompressedRecord(
        codec_id=container.CODEC_DICTIONARY,
        n_channels=x.n_channels,
        n_samples=x.n_samples,
        fs=fs,
        levels=levels,
        target_bps=target_bps,
        quant_scale=first_scale,
        side_info=side,
        payload=spiht.Bitstream(payload_bytes, len(payload_bytes) * 8),
    )


def _parse_side(record: container.CompressedRecord):
    blob = record.side_info
    if len(blob) < 19:
        raise StructureError("dictionary side info truncated")
    epoch, n_seg, levels, _precision, capacity = struct.unpack_from("<IIHBI", blob, 0)
    (flag_len,) = struct.unpack_from("<I", blob, 15)
    pos = 19 + flag_len
    flag_text = blob[19:pos].decode("utf-8")
    total = record.n_channels * n_seg
    if len(blob) - pos < total * _SEG_HEAD.size:
        raise StructureError("dictionary segment directory truncated")
    segs = [_SEG_HEAD.unpack_from(blob, pos + i * _SEG_HEAD.size) for i in range(total)]
    return epoch, n_seg, levels, capacity, flag_text, segs


def read_flag_sections(record: container.CompressedRecord) -> list[FlagSection]:
    """The seizure-like sections stored in a codec-2 container."""
    _, _, _, _, flag_text, _ = _parse_side(record)
    sections = []
    for line in flag_text.splitlines():
        parts = line.split(None, 2)
        if len(parts) >= 2:
            sections.append(FlagSection(float(parts[0]), float(parts[1]),
                                        parts[2] if len(parts) == 3 else ""))
    return sections


def decompress(record: container.CompressedRecord,
               list_trace: list | None = None) -> SignalMatrix:
    """Reconstruct all channels, replaying the reference-list updates."""
    if record.codec_id != container.CODEC_DICTIONARY:
        raise StructureError(f"record holds codec id {record.codec_id}, not dictionary")
    epoch, n_seg, levels, capacity, _, segs = _parse_side(record)
    payload = record.payload.data
    out = np.zeros((record.n_channels, n_seg * epoch))
    pos = 0
    idx = 0
    for ch in range(record.n_channels):
        ref_list = ReferenceList(capacity=capacity)
        for j in range(n_seg):
            mode, ref_id, scale, bit_len = segs[idx]
            idx += 1
            nbytes = (bit_len + 7) // 8
            chunk = payload[pos: pos + nbytes]
            pos += nbytes
            stream = spiht.Bitstream(chunk, min(bit_len, len(chunk) * 8))
            decoded = spiht.dequantize(spiht.decode(stream, epoch, levels), scale)
            recon = _apply_decoded(mode, ref_id, decoded, ref_list, record.fs)
            out[ch, j * epoch: (j + 1) * epoch] = wavelet.idwt1d(recon)
            if list_trace is not None:
                list_trace.append((ch, j, ref_list.snapshot()))
    return SignalMatrix(out[:, : record.n_samples])

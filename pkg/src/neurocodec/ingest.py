"""Reading EEG recordings (EDF or the raw-matrix fallback) and flag files.

Two input formats are supported so the toolkit runs with or without access
to clinical data:

* EDF: the standard 256-byte header plus per-signal headers, 16-bit data
  records, digital-to-physical linear calibration.
* Raw fallback (``.ncr``): magic ``NCR1``, little-endian u32 n_channels,
  u32 n_samples, u32 fs, f64 gain, then channel-major int16 samples.
  A sample decodes to ``int16 * gain`` microvolts.

Flag files are UTF-8 text, one ``start_s end_s label`` triple per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, RangeError, StructureError

RAW_MAGIC = b"NCR1"


@dataclass
class SignalMatrix:
    """Channels x samples of EEG amplitudes in microvolts."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 1:
            self.data = self.data[np.newaxis, :]
        if self.data.ndim != 2:
            raise StructureError(f"signal matrix must be 2-D, got ndim={self.data.ndim}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise StructureError(f"signal matrix must be non-empty, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise StructureError("signal matrix contains non-finite values")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def as_signal_matrix(x) -> SignalMatrix:
    """Coerce an array-like (1-D or 2-D) or SignalMatrix to SignalMatrix."""
    if isinstance(x, SignalMatrix):
        return x
    return SignalMatrix(np.asarray(x, dtype=np.float64))


@dataclass
class Recording:
    """A multichannel recording with its sampling metadata."""

    patient_id: str
    channels: list[str]
    fs: int
    samples: SignalMatrix
    precision_bits: int = 16

    def __post_init__(self):
        if self.fs <= 0:
            raise StructureError(f"fs must be positive, got {self.fs}")
        if len(self.channels) != self.samples.n_channels:
            raise StructureError(
                f"{len(self.channels)} channel labels for {self.samples.n_channels} rows"
            )

    @property
    def duration_s(self) -> float:
        return self.samples.n_samples / self.fs


@dataclass(order=True)
class FlagSection:
    """A detector-flagged time interval, in seconds from recording start."""

    start_s: float
    end_s: float
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise FormatError(f"bad flag section [{self.start_s}, {self.end_s}]")

    def overlap_s(self, other: "FlagSection") -> float:
        """Length of the overlap with another section, in seconds (>= 0)."""
        return max(0.0, min(self.end_s, other.end_s) - max(self.start_s, other.start_s))


def slice_recording(rec: Recording, start_s: float, dur_s: float) -> SignalMatrix:
    """Extract the sub-matrix covering [start_s, start_s + dur_s).

    Sample-aligned by flooring ``start_s * fs``; the window must lie inside
    the recording.
    """
    if start_s < 0 or dur_s <= 0 or start_s + dur_s > rec.duration_s + 1e-12:
        raise RangeError(
            f"window [{start_s}, {start_s + dur_s}) outside recording of {rec.duration_s} s"
        )
    i0 = int(np.floor(start_s * rec.fs))
    n = int(np.floor(dur_s * rec.fs))
    if i0 + n > rec.samples.n_samples:
        raise RangeError("window exceeds recording length")
    return SignalMatrix(rec.samples.data[:, i0:i0 + n].copy())


# ---------------------------------------------------------------------------
# EDF
# ---------------------------------------------------------------------------

def _ascii_field(raw: bytes, what: str) -> str:
    try:
        return raw.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise FormatError(f"non-ASCII bytes in EDF {what} field") from exc


def _int_field(raw: bytes, what: str) -> int:
    text = _ascii_field(raw, what)
    try:
        return int(text)
    except ValueError as exc:
        raise FormatError(f"bad integer in EDF {what} field: {text!r}") from exc


def _float_field(raw: bytes, what: str) -> float:
    text = _ascii_field(raw, what)
    try:
        return float(text)
    except ValueError as exc:
        raise FormatError(f"bad number in EDF {what} field: {text!r}") from exc


def read_edf(path) -> Recording:
    """Read an EDF file into a Recording (amplitudes in physical units).

    All signals must share one sampling rate and sample count; EDF+
    annotation signals are not supported.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 256:
        raise FormatError(f"{path}: too short for an EDF header")
    head = blob[:256]

    patient = _ascii_field(head[8:88], "patient")
    n_records = _int_field(head[236:244], "n_records")
    record_dur = _float_field(head[244:252], "record_duration")
    n_signals = _int_field(head[252:256], "n_signals")
    if n_signals <= 0 or n_records < 0 or record_dur <= 0:
        raise FormatError(f"{path}: implausible EDF header counts")

    sig_head_len = n_signals * 256
    if len(blob) < 256 + sig_head_len:
        raise FormatError(f"{path}: truncated EDF signal headers")
    sh = blob[256:256 + sig_head_len]

    def sig_fields(offset: int, width: int) -> list[bytes]:
        base = offset * n_signals
        return [sh[base + i * width: base + (i + 1) * width] for i in range(n_signals)]

    # per-signal blocks, cumulative widths: label 16, transducer 80, phys dim 8,
    # phys min/max 8+8, dig min/max 8+8, prefilter 80, samples/record 8
    labels = [_ascii_field(b, "label") for b in sig_fields(0, 16)]
    phys_min = [_float_field(b, "physical_min") for b in sig_fields(104, 8)]
    phys_max = [_float_field(b, "physical_max") for b in sig_fields(112, 8)]
    dig_min = [_int_field(b, "digital_min") for b in sig_fields(120, 8)]
    dig_max = [_int_field(b, "digital_max") for b in sig_fields(128, 8)]
    samples_per_rec = [_int_field(b, "samples_per_record") for b in sig_fields(216, 8)]

    if len(set(samples_per_rec)) != 1:
        raise StructureError(f"{path}: signals disagree on samples per record")
    spr = samples_per_rec[0]
    if spr <= 0:
        raise FormatError(f"{path}: non-positive samples per record")
    fs_float = spr / record_dur
    fs = int(round(fs_float))
    if abs(fs_float - fs) > 1e-9 or fs <= 0:
        raise FormatError(f"{path}: non-integer sampling rate {fs_float}")

    data_start = 256 + sig_head_len
    expected = n_records * n_signals * spr * 2
    if len(blob) - data_start < expected:
        raise StructureError(
            f"{path}: data section holds {len(blob) - data_start} bytes, header promises {expected}"
        )
    raw = np.frombuffer(blob, dtype="<i2", count=n_records * n_signals * spr, offset=data_start)
    # records are interleaved: (record, signal, sample) -> (signal, record*sample)
    digital = raw.reshape(n_records, n_signals, spr).transpose(1, 0, 2).reshape(n_signals, -1)

    data = np.empty(digital.shape, dtype=np.float64)
    for i in range(n_signals):
        dig_range = dig_max[i] - dig_min[i]
        if dig_range == 0:
            raise FormatError(f"{path}: signal {labels[i]!r} has zero digital range")
        gain = (phys_max[i] - phys_min[i]) / dig_range
        offset = phys_min[i] - dig_min[i] * gain
        data[i] = digital[i] * gain + offset

    return Recording(
        patient_id=patient or path.stem,
        channels=labels,
        fs=fs,
        samples=SignalMatrix(data),
        precision_bits=16,
    )


def write_edf(path, rec: Recording, record_dur_s: float = 1.0) -> None:
    """Write a Recording as a plain 16-bit EDF file.

    The recording length must be a whole number of data records. Physical
    ranges are chosen per channel from the data extrema.
    """
    path = Path(path)
    spr = int(round(rec.fs * record_dur_s))
    n_samples = rec.samples.n_samples
    if spr <= 0 or n_samples % spr != 0:
        raise StructureError("recording length is not a whole number of data records")
    n_records = n_samples // spr
    n_signals = rec.samples.n_channels

    def pad(text: str, width: int) -> bytes:
        b = text.encode("ascii")[:width]
        return b + b" " * (width - len(b))

    head = b"".join([
        pad("0", 8),
        pad(rec.patient_id, 80),
        pad("neurocodec export", 80),
        pad("01.01.00", 8),
        pad("00.00.00", 8),
        pad(str(256 + 256 * n_signals), 8),
        pad("", 44),
        pad(str(n_records), 8),
        pad(f"{record_dur_s:g}", 8),
        pad(str(n_signals), 4),
    ])

    dig_min, dig_max = -32768, 32767
    phys_mins, phys_maxs, digital = [], [], []
    for ch in rec.samples.data:
        span = float(np.max(np.abs(ch))) or 1.0
        phys_mins.append(-span)
        phys_maxs.append(span)
        gain = 2 * span / (dig_max - dig_min)
        digital.append(np.clip(np.round((ch + span) / gain) + dig_min, dig_min, dig_max))

    sig_head = b"".join(
        [b"".join(pad(lbl, 16) for lbl in rec.channels)]
        + [b"".join(pad("", 80) for _ in range(n_signals))]
        + [b"".join(pad("uV", 8) for _ in range(n_signals))]
        + [b"".join(pad(f"{phys_mins[i]:.6g}"[:8], 8) for i in range(n_signals))]
        + [b"".join(pad(f"{phys_maxs[i]:.6g}"[:8], 8) for i in range(n_signals))]
        + [b"".join(pad(str(dig_min), 8) for _ in range(n_signals))]
        + [b"".join(pad(str(dig_max), 8) for _ in range(n_signals))]
        + [b"".join(pad("", 80) for _ in range(n_signals))]
        + [b"".join(pad(str(spr), 8) for _ in range(n_signals))]
        + [b"".join(pad("", 32) for _ in range(n_signals))]
    )

    body = (
        np.stack(digital)
        .reshape(n_signals, n_records, spr)
        .transpose(1, 0, 2)
        .astype("<i2")
        .tobytes()
    )
    path.write_bytes(head + sig_head + body)


# ---------------------------------------------------------------------------
# Raw-matrix fallback
# ---------------------------------------------------------------------------

def read_raw(path) -> Recording:
    """Read the raw-matrix fallback format into a Recording."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 24 or blob[:4] != RAW_MAGIC:
        raise FormatError(f"{path}: not a raw recording (missing {RAW_MAGIC!r} magic)")
    n_channels, n_samples, fs = struct.unpack_from("<III", blob, 4)
    (gain,) = struct.unpack_from("<d", blob, 16)
    if n_channels < 1 or n_samples < 1 or fs < 1:
        raise FormatError(f"{path}: implausible raw header")
    count = n_channels * n_samples
    if len(blob) - 24 < 2 * count:
        raise StructureError(f"{path}: raw data section truncated")
    ints = np.frombuffer(blob, dtype="<i2", count=count, offset=24)
    data = ints.reshape(n_channels, n_samples).astype(np.float64) * gain
    labels = [f"ch{i:02d}" for i in range(n_channels)]
    return Recording(path.stem, labels, fs, SignalMatrix(data), precision_bits=16)


def write_raw(path, rec: Recording, gain: float | None = None) -> None:
    """Write a Recording in the raw-matrix fallback format.

    With the default gain (max |amplitude| / 32767) data already on such an
    int16 grid round-trips bit-exactly.
    """
    path = Path(path)
    data = rec.samples.data
    if gain is None:
        peak = float(np.max(np.abs(data)))
        gain = peak / 32767.0 if peak > 0 else 1.0
    ints = np.clip(np.round(data / gain), -32768, 32767).astype("<i2")
    head = RAW_MAGIC + struct.pack("<IIId", rec.samples.n_channels, rec.samples.n_samples, rec.fs, gain)
    path.write_bytes(head + ints.tobytes())


def read_recording(path) -> Recording:
    """Dispatch on magic bytes: EDF or the raw fallback format."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == RAW_MAGIC:
        return read_raw(path)
    return read_edf(path)


# ---------------------------------------------------------------------------
# Flag files
# ---------------------------------------------------------------------------

def read_flags(path) -> list[FlagSection]:
    """Read flagged sections from the plain-text flag format, sorted by start."""
    sections = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 2:
            raise FormatError(f"{path}:{lineno}: expected 'start end label'")
        try:
            start_s, end_s = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric bounds") from exc
        label = parts[2] if len(parts) == 3 else ""
        try:
            sections.append(FlagSection(start_s, end_s, label))
        except FormatError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    sections.sort(key=lambda s: (s.start_s, s.end_s))
    return sections


def format_flags(sections: list[FlagSection]) -> str:
    """Render sections in the flag-file text format."""
    return "".join(f"{s.start_s:.6g} {s.end_s:.6g} {s.label or 'flag'}\n" for s in sections)


def write_flags(path, sections: list[FlagSection]) -> None:
    Path(path).write_text(format_flags(sections))

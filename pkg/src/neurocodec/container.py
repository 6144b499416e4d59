"""The compressed-record container shared by all three codecs.

Byte layout (all little-endian):

    magic "NCC1" | u8 codec_id | u8 version | u32 n_channels | u32 n_samples
    | u32 fs | u16 levels | f64 target_bps | f64 quant_scale
    | u32 side_info_len | side_info bytes
    | u64 payload_bit_len | payload bytes (zero-padded to a whole byte)

codec ids: 1 = spiht2d, 2 = dictionary, 3 = dipole. ``quant_scale`` carries
the quantizer scale for single-unit records; codecs that code several
units (segments, fit windows) keep per-unit scales in their side info and
set the header field to the first unit's scale.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, StructureError
from .spiht import Bitstream

MAGIC = b"NCC1"
VERSION = 1

CODEC_SPIHT2D = 1
CODEC_DICTIONARY = 2
CODEC_DIPOLE = 3
CODEC_NAMES = {CODEC_SPIHT2D: "spiht2d", CODEC_DICTIONARY: "dictionary", CODEC_DIPOLE: "dipole"}

_FIXED = struct.Struct("<4sBBIIIHddI")


@dataclass
class CompressedRecord:
    """Bit-exact compressed container: header, side info, embedded payload.

    ``truncated`` is set by the parser when the payload on disk was shorter
    than the header promised (the embedded stream still decodes).
    """

    codec_id: int
    n_channels: int
    n_samples: int
    fs: int
    levels: int
    target_bps: float
    quant_scale: float
    side_info: bytes
    payload: Bitstream
    truncated: bool = False

    @property
    def header_bits(self) -> int:
        return (_FIXED.size + 8) * 8  # fixed fields + payload bit-length field

    @property
    def side_info_bits(self) -> int:
        return len(self.side_info) * 8

    @property
    def payload_bits(self) -> int:
        return self.payload.length_bits

    @property
    def coded_bits(self) -> int:
        """Bits that count toward achieved rate: payload plus side info."""
        return self.payload_bits + self.side_info_bits

    def to_bytes(self) -> bytes:
        head = _FIXED.pack(
            MAGIC, self.codec_id, VERSION, self.n_channels, self.n_samples,
            self.fs, self.levels, self.target_bps, self.quant_scale,
            len(self.side_info),
        )
        return (
            head
            + self.side_info
            + struct.pack("<Q", self.payload.length_bits)
            + self.payload.data
        )

    @classmethod
    def from_bytes(cls, blob: bytes, offset: int = 0) -> tuple["CompressedRecord", int]:
        """Parse one record starting at ``offset``; returns (record, next offset)."""
        if len(blob) - offset < _FIXED.size:
            raise FormatError("container truncated before header end")
        magic, codec_id, version, n_ch, n_samp, fs, levels, target, scale, side_len = (
            _FIXED.unpack_from(blob, offset)
        )
        if magic != MAGIC:
            raise FormatError(f"bad container magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        if codec_id not in CODEC_NAMES:
            raise FormatError(f"unknown codec id {codec_id}")
        pos = offset + _FIXED.size
        if len(blob) - pos < side_len + 8:
            raise StructureError("container truncated inside side info")
        side = blob[pos: pos + side_len]
        pos += side_len
        (payload_bits,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        nbytes = (payload_bits + 7) // 8
        chunk = blob[pos: pos + nbytes]
        truncated = len(chunk) < nbytes
        if truncated:
            # salvage what is there; the embedded payload still decodes
            payload = Bitstream(bytes(chunk), len(chunk) * 8)
        else:
            payload = Bitstream(bytes(chunk), payload_bits)
        pos += len(chunk)
        rec = cls(codec_id, n_ch, n_samp, fs, levels, target, scale, bytes(side),
                  payload, truncated=truncated)
        return rec, pos


def write_records(path, records: list[CompressedRecord]) -> None:
    """Write records back-to-back into one file."""
    Path(path).write_bytes(b"".join(r.to_bytes() for r in records))


def read_records(path) -> list[CompressedRecord]:
    """Read every record from a file of concatenated containers."""
    blob = Path(path).read_bytes()
    records, pos = [], 0
    while pos < len(blob):
        rec, pos = CompressedRecord.from_bytes(blob, pos)
        records.append(rec)
    if not records:
        raise FormatError(f"{path}: no records found")
    return records

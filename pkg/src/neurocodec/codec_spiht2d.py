"""Method 1: 2-D wavelet + SPIHT coding of the channel x time matrix.

Inter-channel redundancy is concentrated before the transform: channels are
mean-removed and greedily reordered so each row correlates maximally with
its predecessor, then the matrix is zero-padded to transform-compatible
sizes. Distortion originates only in quantization and the bit budget; the
side info (means, permutation, pads) is lossless.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import container, spiht, wavelet
from .errors import SizeError, StructureError
from .ingest import SignalMatrix, as_signal_matrix

DEFAULT_LEVELS = 4
DEFAULT_WINDOW = 65536  # 256 s at 256 Hz; the per-file batching unit


@dataclass
class PreprocSideInfo:
    """Lossless bookkeeping for the pre-transform step.

    ``channel_order[i]`` is the original index of the row placed at
    position i of the working matrix.
    """

    channel_order: list[int]
    channel_means: np.ndarray
    pad_rows: int
    pad_cols: int

    def to_bytes(self) -> bytes:
        n = len(self.channel_order)
        return (
            struct.pack("<IHH", n, self.pad_rows, self.pad_cols)
            + struct.pack(f"<{n}H", *self.channel_order)
            + np.asarray(self.channel_means, dtype="<f8").tobytes()
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PreprocSideInfo":
        if len(blob) < 8:
            raise StructureError("preprocess side info truncated")
        n, pad_rows, pad_cols = struct.unpack_from("<IHH", blob, 0)
        need = 8 + 2 * n + 8 * n
        if len(blob) < need:
            raise StructureError("preprocess side info truncated")
        order = list(struct.unpack_from(f"<{n}H", blob, 8))
        means = np.frombuffer(blob, dtype="<f8", count=n, offset=8 + 2 * n).copy()
        return cls(order, means, pad_rows, pad_cols)


def _correlations(rows: np.ndarray) -> np.ndarray:
    """Pearson correlation matrix; zero-variance rows correlate 0."""
    centered = rows - rows.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered * centered, axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    unit = centered / safe[:, None]
    corr = unit @ unit.T
    corr[norms == 0, :] = 0.0
    corr[:, norms == 0] = 0.0
    return corr


def greedy_channel_order(rows: np.ndarray) -> list[int]:
    """Order channels so each maximizes correlation with its predecessor.

    The chain starts from the channel with the highest mean absolute
    correlation to all others; ties go to the lower index.
    """
    n = rows.shape[0]
    if n == 1:
        return [0]
    corr = _correlations(rows)
    mean_abs = (np.sum(np.abs(corr), axis=1) - np.abs(np.diag(corr))) / (n - 1)
    order = [int(np.argmax(mean_abs))]
    remaining = [i for i in range(n) if i != order[0]]
    while remaining:
        last = order[-1]
        nxt = max(range(len(remaining)), key=lambda j: (corr[last, remaining[j]], -remaining[j]))
        order.append(remaining.pop(nxt))
    return order


def _pad_to_multiple(n: int, block: int) -> int:
    return (-n) % block


def preprocess(m, levels: int = DEFAULT_LEVELS) -> tuple[SignalMatrix, PreprocSideInfo]:
    """Mean-remove, reorder, and zero-pad a matrix for 2-D coding."""
    x = as_signal_matrix(m)
    if x.n_channels < 2:
        raise SizeError("2-D preprocessing needs at least 2 channels")
    data = x.data
    means = data.mean(axis=1)
    centered = data - means[:, None]
    order = greedy_channel_order(centered)
    work = centered[order, :]
    block = 2 ** levels
    pad_rows = _pad_to_multiple(work.shape[0], block)
    pad_cols = _pad_to_multiple(work.shape[1], block)
    if pad_rows or pad_cols:
        work = np.pad(work, ((0, pad_rows), (0, pad_cols)))
    side = PreprocSideInfo([int(i) for i in order], means, pad_rows, pad_cols)
    return SignalMatrix(work), side


def unpreprocess(m, side: PreprocSideInfo) -> SignalMatrix:
    """Invert preprocess: crop pads, undo the permutation, restore means."""
    x = as_signal_matrix(m)
    n = len(side.channel_order)
    want_rows = n + side.pad_rows
    if x.n_channels != want_rows or x.n_samples <= side.pad_cols:
        raise StructureError(
            f"matrix shape {x.data.shape} inconsistent with side info "
            f"({want_rows} rows, {side.pad_cols} pad cols)"
        )
    cropped = x.data[:n, : x.n_samples - side.pad_cols]
    out = np.empty_like(cropped)
    out[side.channel_order, :] = cropped
    out += np.asarray(side.channel_means)[:, None]
    return SignalMatrix(out)


def compress(window, target_bps: float, *, fs: int = 256,
             levels: int = DEFAULT_LEVELS, precision_bits: int = 16) -> container.CompressedRecord:
    """Compress one channel x time window at a target payload rate.

    The payload budget is floor(target_bps * n_channels * n_samples) bits
    over the original (pre-padding) sample count.
    """
    if not 0 < target_bps <= 16:
        raise ValueError(f"target_bps must be in (0, 16], got {target_bps}")
    x = as_signal_matrix(window)
    if min(x.n_channels, x.n_samples) < 2 ** levels:
        raise SizeError(
            f"window of shape {x.data.shape} smaller than 2^{levels} in one dimension"
        )
    budget = int(target_bps * x.n_channels * x.n_samples)
    work, side = preprocess(x, levels)
    pyramid = wavelet.dwt2d(work.data, levels)
    ints, scale = spiht.quantize(pyramid, precision_bits)
    payload = spiht.encode(ints, budget)
    return container.CompressedRecord(
        codec_id=container.CODEC_SPIHT2D,
        n_channels=x.n_channels,
        n_samples=x.n_samples,
        fs=fs,
        levels=levels,
        target_bps=target_bps,
        quant_scale=scale,
        side_info=side.to_bytes(),
        payload=payload,
    )


def decompress(record: container.CompressedRecord) -> SignalMatrix:
    """Reconstruct the window from a codec-1 container."""
    if record.codec_id != container.CODEC_SPIHT2D:
        raise StructureError(f"record holds codec id {record.codec_id}, not spiht2d")
    side = PreprocSideInfo.from_bytes(record.side_info)
    dims = (record.n_channels + side.pad_rows, record.n_samples + side.pad_cols)
    ints = spiht.decode(record.payload, dims, record.levels)
    pyramid = spiht.dequantize(ints, record.quant_scale)
    work = wavelet.idwt2d(pyramid)
    return unpreprocess(work, side)

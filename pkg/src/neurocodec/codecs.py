"""One compress/decompress surface over the three codecs.

``compress`` returns a list of records: the 2-D SPIHT codec splits long
inputs into windows (one record each), the other codecs emit one record.
``decompress`` accepts any record list and concatenates the reconstructions.
"""

from __future__ import annotations

import numpy as np

from . import codec_dictionary, codec_dipole, codec_spiht2d, container
from .errors import StructureError
from .ingest import SignalMatrix, as_signal_matrix

CODEC_IDS = {
    "spiht2d": container.CODEC_SPIHT2D,
    "dictionary": container.CODEC_DICTIONARY,
    "dipole": container.CODEC_DIPOLE,
}


def compress(signal, target_bps: float, codec: str = "spiht2d", *, fs: int = 256,
             window: int | None = None, **options) -> list[container.CompressedRecord]:
    """Compress a channels x samples signal with the named codec."""
    x = as_signal_matrix(signal)
    if codec == "spiht2d":
        step = window or codec_spiht2d.DEFAULT_WINDOW
        levels = options.get("levels", codec_spiht2d.DEFAULT_LEVELS)
        spans = [(lo, min(lo + step, x.n_samples)) for lo in range(0, x.n_samples, step)]
        if len(spans) > 1 and spans[-1][1] - spans[-1][0] < 2 ** levels:
            lo, _ = spans.pop()              # fold a short tail into the last window
            spans[-1] = (spans[-1][0], x.n_samples)
        records = []
        for lo, hi in spans:
            chunk = SignalMatrix(x.data[:, lo:hi].copy())
            records.append(codec_spiht2d.compress(chunk, target_bps, fs=fs, **options))
        return records
    if codec == "dictionary":
        return [codec_dictionary.compress(x, target_bps, fs=fs, **options)]
    if codec == "dipole":
        if window is not None:
            options["window"] = window
        return [codec_dipole.compress(x, target_bps, fs=fs, **options)]
    raise ValueError(f"unknown codec {codec!r}; pick one of {sorted(CODEC_IDS)}")


def decompress_record(record: container.CompressedRecord) -> SignalMatrix:
    """Reconstruct one record, dispatching on its codec id."""
    if record.codec_id == container.CODEC_SPIHT2D:
        return codec_spiht2d.decompress(record)
    if record.codec_id == container.CODEC_DICTIONARY:
        return codec_dictionary.decompress(record)
    if record.codec_id == container.CODEC_DIPOLE:
        return codec_dipole.decompress(record)
    raise StructureError(f"unknown codec id {record.codec_id}")


def decompress(records) -> SignalMatrix:
    """Reconstruct and concatenate a record list (one signal, windowed)."""
    if isinstance(records, container.CompressedRecord):
        records = [records]
    if not records:
        raise StructureError("no records to decompress")
    first = records[0]
    for r in records[1:]:
        if (r.codec_id, r.n_channels, r.fs) != (first.codec_id, first.n_channels, first.fs):
            raise StructureError("records disagree on codec, channels, or sampling rate")
    parts = [decompress_record(r).data for r in records]
    return SignalMatrix(np.concatenate(parts, axis=1))

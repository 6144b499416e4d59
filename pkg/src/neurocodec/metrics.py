"""Distortion and rate metrics: PRD, achieved bits/sample, compression ratio.

PRD is computed on raw energies (no mean removal) by default so numbers are
comparable run to run; a mean-removed variant is provided alongside.
The 16-bit recording precision is the uncompressed baseline, so the
compression ratio is 16 / achieved bits-per-sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import CompressedRecord
from .errors import MetricError, StructureError
from .ingest import as_signal_matrix

BASELINE_BPS = 16.0


@dataclass
class RateDistortionPoint:
    """One operating point: target vs. achieved rate and its distortion."""

    target_bps: float
    achieved_bps: float
    cr: float
    prd: float


def _pair(x, xhat) -> tuple[np.ndarray, np.ndarray]:
    a = as_signal_matrix(x).data
    b = as_signal_matrix(xhat).data
    if a.shape != b.shape:
        raise StructureError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def prd(x, xhat) -> float:
    """Percent root-mean-square difference: 100 * sqrt(sum((x-xhat)^2) / sum(x^2)).

    Sums run over all channels and samples; raises MetricError for a
    zero-energy reference.
    """
    a, b = _pair(x, xhat)
    ref = float(np.sum(a * a))
    if ref <= 0.0:
        raise MetricError("PRD undefined for a zero-energy reference")
    err = float(np.sum((a - b) ** 2))
    return 100.0 * np.sqrt(err / ref)


def prd_mean_removed(x, xhat) -> float:
    """PRD variant with the per-channel mean removed from the reference energy."""
    a, b = _pair(x, xhat)
    centered = a - a.mean(axis=1, keepdims=True)
    ref = float(np.sum(centered * centered))
    if ref <= 0.0:
        raise MetricError("mean-removed PRD undefined for a constant reference")
    err = float(np.sum((a - b) ** 2))
    return 100.0 * np.sqrt(err / ref)


def achieved_bps(records, n_scalar_samples: int) -> float:
    """Payload plus side-info bits per original scalar sample."""
    if isinstance(records, CompressedRecord):
        records = [records]
    if n_scalar_samples <= 0:
        raise MetricError("no samples to amortize over")
    return sum(r.coded_bits for r in records) / n_scalar_samples


def rd_point(original, records, reconstruction) -> RateDistortionPoint:
    """Rate-distortion summary for one compression run.

    ``records`` is one CompressedRecord or the list covering the signal.
    Side-info bits count toward the achieved rate; fixed header bytes do
    not (they are reported separately by the records themselves).
    """
    x = as_signal_matrix(original)
    recs = [records] if isinstance(records, CompressedRecord) else list(records)
    bps = achieved_bps(recs, x.n_channels * x.n_samples)
    if bps <= 0.0:
        raise MetricError("achieved rate must be positive")
    return RateDistortionPoint(
        target_bps=recs[0].target_bps,
        achieved_bps=bps,
        cr=BASELINE_BPS / bps,
        prd=prd(original, reconstruction),
    )

"""Proxy burst detector plus flag matching and report aggregation.

The detector is a documented, deterministic stand-in for a clinical onset
detector: per 2 s epoch it averages 3-30 Hz rhythm-band energy across
channels, compares against the trailing 120 s median, and opens a flagged
section after 3 consecutive epochs above ``onset_ratio`` times the median.
The section closes after 5 consecutive epochs below twice the median, and
sections closer than 30 s merge.

Matching follows the one-minute-overlap rule: a compressed-run section
counts as a true positive when it overlaps some original-run section by at
least 60 s, each original section creditable once, assignment greedy in
time order; everything else is a false positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import wavelet
from .errors import MetricError
from .ingest import FlagSection, Recording

EPOCH_S = 2.0
MEDIAN_WINDOW_S = 120.0
ONSET_RATIO = 5.0
ONSET_RUN = 3
END_RATIO = 2.0
END_RUN = 5
MERGE_GAP_S = 30.0
MIN_OVERLAP_S = 60.0


@dataclass
class DetectionReport:
    """TP/FP outcome of one compressed run against its original run."""

    ground_truth_count: int
    tp_count: int
    fp_count: int

    @property
    def tp_percent(self) -> float | None:
        """100 * tp / ground truth; None (not applicable) without ground truth."""
        if self.ground_truth_count == 0:
            return None
        return 100.0 * self.tp_count / self.ground_truth_count


def epoch_statistics(rec: Recording, epoch_s: float = EPOCH_S, levels: int = 5) -> np.ndarray:
    """Per-epoch detector statistic: channel-mean 3-30 Hz band energy."""
    epoch_len = int(round(epoch_s * rec.fs))
    n_epochs = rec.samples.n_samples // epoch_len
    if n_epochs == 0:
        return np.zeros(0)
    levels = min(levels, int(np.floor(np.log2(epoch_len))))
    stats = np.zeros(n_epochs)
    for ch in rec.samples.data:
        rows = ch[: n_epochs * epoch_len].reshape(n_epochs, epoch_len)
        energies = wavelet.rowwise_band_energies(rows, rec.fs, levels)
        stats += energies[:, 1] + energies[:, 2] + energies[:, 3]   # theta+alpha+beta
    return stats / rec.samples.n_channels


def detect(rec: Recording, *, onset_ratio: float = ONSET_RATIO,
           epoch_s: float = EPOCH_S, median_window_s: float = MEDIAN_WINDOW_S,
           onset_run: int = ONSET_RUN, end_ratio: float = END_RATIO,
           end_run: int = END_RUN, merge_gap_s: float = MERGE_GAP_S,
           label: str = "auto") -> list[FlagSection]:
    """Run the proxy onset detector over a recording.

    Returns flagged sections sorted by start; recordings shorter than the
    median warm-up window yield an empty list. The statistic is a ratio, so
    the output is invariant to uniform amplitude scaling.
    """
    stats = epoch_statistics(rec, epoch_s)
    med_win = int(round(median_window_s / epoch_s))
    n = len(stats)
    if n <= med_win:
        return []

    raw: list[tuple[int, int]] = []
    active = False
    run = quiet = 0
    start_epoch = 0
    for e in range(med_win, n):
        med = float(np.median(stats[e - med_win: e]))
        if med > 0:
            ratio = stats[e] / med
        else:
            ratio = np.inf if stats[e] > 0 else 0.0
        if not active:
            run = run + 1 if ratio > onset_ratio else 0
            if run >= onset_run:
                active = True
                start_epoch = e - onset_run + 1
                quiet = 0
        else:
            if ratio < end_ratio:
                quiet += 1
                if quiet >= end_run:
                    raw.append((start_epoch, e - end_run + 1))
                    active = False
                    run = 0
            else:
                quiet = 0
    if active:
        raw.append((start_epoch, n))

    sections: list[FlagSection] = []
    for start_epoch, end_epoch in raw:
        start_s, end_s = start_epoch * epoch_s, end_epoch * epoch_s
        if sections and start_s - sections[-1].end_s < merge_gap_s:
            sections[-1] = FlagSection(sections[-1].start_s, end_s, label)
        else:
            sections.append(FlagSection(start_s, end_s, label))
    return sections


def match_flags(original: list[FlagSection], compressed: list[FlagSection],
                min_overlap_s: float = MIN_OVERLAP_S) -> DetectionReport:
    """Score compressed-run sections against original-run sections.

    A compressed section is a TP when it overlaps an as-yet-uncredited
    original section by at least ``min_overlap_s``; the earliest qualifying
    original is consumed (greedy in time order). Every other compressed
    section is an FP, so tp + fp equals the compressed section count.
    """
    originals = sorted(original)
    used = [False] * len(originals)
    tp = 0
    for comp in sorted(compressed):
        for i, orig in enumerate(originals):
            if not used[i] and comp.overlap_s(orig) >= min_overlap_s:
                used[i] = True
                tp += 1
                break
    return DetectionReport(len(originals), tp, len(compressed) - tp)


@dataclass
class DetectionSummary:
    """Unweighted averages across per-recording reports."""

    mean_tp_percent: float
    mean_fp_count: float
    n_reports: int


def aggregate(reports: list[DetectionReport]) -> DetectionSummary:
    """Average tp_percent and fp_count across reports (rows without ground
    truth are excluded from the TP mean)."""
    if not reports:
        raise MetricError("nothing to aggregate")
    tp_values = [r.tp_percent for r in reports if r.tp_percent is not None]
    if not tp_values:
        raise MetricError("every report lacks ground truth; TP percentage undefined")
    mean_tp = float(np.mean(tp_values))
    mean_fp = float(np.mean([r.fp_count for r in reports]))
    return DetectionSummary(mean_tp, mean_fp, len(reports))


def report_csv(reports: list[DetectionReport]) -> str:
    """Rows of ``detections,tp_percent,fp_count`` plus an Average row."""
    lines = ["detections,tp_percent,fp_count"]
    for r in reports:
        tp = "" if r.tp_percent is None else f"{r.tp_percent:.2f}"
        lines.append(f"{r.ground_truth_count},{tp},{r.fp_count}")
    summary = aggregate(reports)
    lines.append(f"Average,{summary.mean_tp_percent:.2f},{summary.mean_fp_count:.2f}")
    return "\n".join(lines) + "\n"

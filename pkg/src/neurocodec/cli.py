"""Command-line entry point: compress, decompress, evaluate.

Exit codes: 0 ok, 1 usage/config, 2 format, 3 codec, 4 metric.

A config file of ``key=value`` lines (via --config) supplies defaults;
explicit flags win. Keys use the flag spelling without dashes, e.g.
``bps=2`` or ``smooth-thresh=0.6``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import codecs, codec_dipole, container, detection, metrics
from .errors import (
    BudgetError, FitError, FormatError, MetricError, RangeError, SizeError, StructureError,
)
from .ingest import Recording, SignalMatrix, read_recording, write_raw

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_CODEC = 3
EXIT_METRIC = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="neurocodec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    comp = sub.add_parser("compress", help="compress a recording into a .ncc container file")
    comp.add_argument("input", help="EDF or raw (.ncr) recording")
    comp.add_argument("output", help="output container path")
    comp.add_argument("--codec", choices=sorted(codecs.CODEC_IDS), default=None)
    comp.add_argument("--bps", type=float, default=None, help="target payload bits/sample")
    comp.add_argument("--levels", type=int, default=None, help="transform depth")
    comp.add_argument("--epoch", type=int, default=None, help="dictionary epoch length, samples")
    comp.add_argument("--tau", type=float, default=None, help="dictionary match threshold")
    comp.add_argument("--capacity", type=int, default=None, help="dictionary list capacity")
    comp.add_argument("--window", type=int, default=None,
                      help="window samples (dipole fit window / spiht2d batch)")
    comp.add_argument("--smooth-thresh", type=float, default=None,
                      help="dipole residual coder switch threshold")
    comp.add_argument("--config", default=None, help="key=value defaults file")

    dec = sub.add_parser("decompress", help="reconstruct a container into a raw recording")
    dec.add_argument("input", help=".ncc container file")
    dec.add_argument("output", help="output raw (.ncr) path")

    ev = sub.add_parser("evaluate", help="PRD/rate report, optionally with detection scoring")
    ev.add_argument("original", nargs="?", help="original recording (EDF or raw)")
    ev.add_argument("reconstructed", nargs="?",
                    help="container (.ncc) or reconstructed recording")
    ev.add_argument("--pair", nargs=2, action="append", metavar=("ORIG", "COMP"),
                    default=None, help="batch mode; repeatable")
    ev.add_argument("--flags", action="store_true",
                    help="run the proxy detector on both sides and score flags")
    ev.add_argument("--detector-k", type=float, default=None,
                    help="detector onset ratio (default 5)")
    ev.add_argument("--report", default=None, help="write the CSV report here (default stdout)")
    ev.add_argument("--plot-data", default=None,
                    help="write prd,tp_percent scatter points here")
    ev.add_argument("--config", default=None, help="key=value defaults file")
    return parser


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    conf = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        conf[key.strip()] = value.strip()
    return conf


def _setting(args, conf: dict[str, str], name: str, cast, default):
    cli_value = getattr(args, name.replace("-", "_"), None)
    if cli_value is not None:
        return cli_value
    if name in conf:
        try:
            return cast(conf[name])
        except ValueError as exc:
            raise _UsageError(f"config value {name}={conf[name]!r} is not a {cast.__name__}") from exc
    return default


def _cmd_compress(args) -> int:
    conf = _load_config(args.config)
    codec = _setting(args, conf, "codec", str, "spiht2d")
    if codec not in codecs.CODEC_IDS:
        raise _UsageError(f"unknown codec {codec!r}")
    bps = _setting(args, conf, "bps", float, 2.0)
    if not 0 < bps <= 16:
        raise _UsageError(f"--bps must be in (0, 16], got {bps}")
    rec = read_recording(args.input)

    options: dict = {}
    window = _setting(args, conf, "window", int, None)
    if codec == "spiht2d":
        levels = _setting(args, conf, "levels", int, None)
        if levels is not None:
            options["levels"] = levels
    elif codec == "dictionary":
        for key, name, cast in (("epoch", "epoch", int), ("match_threshold", "tau", float),
                                ("capacity", "capacity", int), ("levels", "levels", int)):
            value = _setting(args, conf, name, cast, None)
            if value is not None:
                options[key] = value
    else:  # dipole
        thresh = _setting(args, conf, "smooth-thresh", float, None)
        if thresh is not None:
            options["smooth_threshold"] = thresh
        try:
            options["model"] = codec_dipole.HeadModel.standard_10_20(rec.channels)
        except StructureError:
            print("note: channel labels not in the 10-20 set; using a generic "
                  "spherical layout", file=sys.stderr)

    records = codecs.compress(rec.samples, bps, codec, fs=rec.fs, window=window, **options)
    container.write_records(args.output, records)
    bps_out = metrics.achieved_bps(records, rec.samples.n_channels * rec.samples.n_samples)
    print(f"codec={codec} records={len(records)} achieved_bps={bps_out:.4f} "
          f"cr={metrics.BASELINE_BPS / bps_out:.2f}")
    return EXIT_OK


def _cmd_decompress(args) -> int:
    records = container.read_records(args.input)
    if any(r.truncated for r in records):
        print("warning: payload truncated; writing best-effort reconstruction",
              file=sys.stderr)
    matrix = codecs.decompress(records)
    rec = Recording(
        patient_id=Path(args.input).stem,
        channels=[f"ch{i:02d}" for i in range(matrix.n_channels)],
        fs=records[0].fs,
        samples=matrix,
    )
    write_raw(args.output, rec)
    print(f"wrote {matrix.n_channels}x{matrix.n_samples} samples at {rec.fs} Hz")
    return EXIT_OK


def _load_reconstruction(path: str) -> tuple[SignalMatrix, list[container.CompressedRecord] | None, int]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == container.MAGIC:
        records = container.read_records(path)
        return codecs.decompress(records), records, records[0].fs
    rec = read_recording(path)
    return rec.samples, None, rec.fs


def _cmd_evaluate(args) -> int:
    conf = _load_config(args.config)
    onset_ratio = _setting(args, conf, "detector-k", float, detection.ONSET_RATIO)
    pairs = list(args.pair or [])
    if args.original and args.reconstructed:
        pairs.insert(0, (args.original, args.reconstructed))
    if not pairs:
        raise _UsageError("evaluate needs ORIGINAL RECONSTRUCTED or at least one --pair")

    rows = []
    reports = []
    for orig_path, comp_path in pairs:
        original = read_recording(orig_path)
        recon, records, _ = _load_reconstruction(comp_path)
        if recon.data.shape != original.samples.data.shape:
            raise StructureError(
                f"{comp_path}: reconstruction shape {recon.data.shape} does not match "
                f"original {original.samples.data.shape}"
            )
        value = metrics.prd(original.samples, recon)
        row = {"patient": original.patient_id, "prd": value}
        if records is not None:
            row["achieved_bps"] = metrics.achieved_bps(
                records, original.samples.n_channels * original.samples.n_samples
            )
            row["cr"] = metrics.BASELINE_BPS / row["achieved_bps"]
        if args.flags:
            flags_orig = detection.detect(original, onset_ratio=onset_ratio)
            recon_rec = Recording(original.patient_id, list(original.channels),
                                  original.fs, recon)
            flags_comp = detection.detect(recon_rec, onset_ratio=onset_ratio)
            report = detection.match_flags(flags_orig, flags_comp)
            reports.append(report)
            row.update(detections=report.ground_truth_count,
                       tp_percent=report.tp_percent, fp_count=report.fp_count)
        rows.append(row)

    lines = []
    columns = ["patient", "prd", "achieved_bps", "cr", "detections", "tp_percent", "fp_count"]
    present = [c for c in columns if any(c in row for row in rows)]
    lines.append(",".join(present))
    for row in rows:
        cells = []
        for c in present:
            v = row.get(c, "")
            cells.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    if len(rows) > 1 or reports:
        mean_prd = sum(r["prd"] for r in rows) / len(rows)
        cells = {"patient": "Average", "prd": f"{mean_prd:.4f}"}
        if reports:
            summary = detection.aggregate(reports)
            cells["tp_percent"] = f"{summary.mean_tp_percent:.2f}"
            cells["fp_count"] = f"{summary.mean_fp_count:.2f}"
        lines.append(",".join(cells.get(c, "") for c in present))
    text = "\n".join(lines) + "\n"

    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)

    if args.plot_data:
        if not reports:
            raise _UsageError("--plot-data needs --flags")
        pts = ["prd,tp_percent"]
        for row in rows:
            if row.get("tp_percent") is not None:
                pts.append(f"{row['prd']:.4f},{row['tp_percent']:.2f}")
        Path(args.plot_data).write_text("\n".join(pts) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "compress":
            return _cmd_compress(args)
        if args.command == "decompress":
            return _cmd_decompress(args)
        return _cmd_evaluate(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, StructureError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (SizeError, RangeError, BudgetError, FitError) as exc:
        print(f"codec error: {exc}", file=sys.stderr)
        return EXIT_CODEC
    except MetricError as exc:
        print(f"metric error: {exc}", file=sys.stderr)
        return EXIT_METRIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

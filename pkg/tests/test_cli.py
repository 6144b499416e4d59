import numpy as np
import pytest

from conftest import burst_recording, smooth_eeg
from neurocodec.cli import main
from neurocodec.container import read_records
from neurocodec.ingest import Recording, SignalMatrix, read_raw, write_edf, write_raw


@pytest.fixture
def raw_input(tmp_path):
    x = smooth_eeg(4, 4096, seed=40)
    rec = Recording("pt01", [f"ch{i}" for i in range(4)], 256, SignalMatrix(x))
    path = tmp_path / "in.ncr"
    write_raw(path, rec)
    return path


class TestCompress:
    def test_round_trip_via_cli(self, tmp_path, raw_input, capsys):
        ncc = tmp_path / "out.ncc"
        out = tmp_path / "rec.ncr"
        assert main(["compress", str(raw_input), str(ncc), "--codec", "spiht2d",
                     "--bps", "4", "--levels", "2"]) == 0
        assert "achieved_bps" in capsys.readouterr().out
        assert main(["decompress", str(ncc), str(out)]) == 0
        original = read_raw(raw_input).samples.data
        recon = read_raw(out).samples.data
        assert recon.shape == original.shape

    def test_dictionary_single_channel(self, tmp_path):
        x = smooth_eeg(1, 3000, seed=41)
        rec = Recording("pt", ["c0"], 256, SignalMatrix(x))
        src = tmp_path / "one.ncr"
        write_raw(src, rec)
        ncc = tmp_path / "one.ncc"
        assert main(["compress", str(src), str(ncc), "--codec", "dictionary",
                     "--bps", "2"]) == 0
        records = read_records(ncc)
        assert records[0].codec_id == 2
        assert len(records[0].side_info) > 0

    def test_dipole_codec_id(self, tmp_path, raw_input):
        ncc = tmp_path / "d.ncc"
        assert main(["compress", str(raw_input), str(ncc), "--codec", "dipole",
                     "--bps", "2", "--window", "512"]) == 0
        assert read_records(ncc)[0].codec_id == 3

    def test_bad_bps_is_usage_error(self, tmp_path, raw_input):
        assert main(["compress", str(raw_input), str(tmp_path / "x.ncc"),
                     "--bps", "0"]) == 1

    def test_unknown_flag_is_usage_error(self, tmp_path, raw_input):
        assert main(["compress", str(raw_input), str(tmp_path / "x.ncc"),
                     "--frobnicate"]) == 1

    def test_corrupt_magic_is_format_error(self, tmp_path):
        bad = tmp_path / "bad.ncr"
        bad.write_bytes(b"JUNKJUNKJUNK" + bytes(64))
        assert main(["compress", str(bad), str(tmp_path / "x.ncc")]) == 2

    def test_undersized_window_is_codec_error(self, tmp_path):
        x = smooth_eeg(1, 512, seed=43)
        rec = Recording("pt", ["c0"], 256, SignalMatrix(x))
        src = tmp_path / "one.ncr"
        write_raw(src, rec)
        assert main(["compress", str(src), str(tmp_path / "x.ncc"),
                     "--codec", "spiht2d", "--bps", "2"]) == 3

    def test_short_tail_window_folded(self, tmp_path):
        x = smooth_eeg(4, 2048 + 10, seed=44)
        rec = Recording("pt", [f"c{i}" for i in range(4)], 256, SignalMatrix(x))
        src = tmp_path / "tail.ncr"
        write_raw(src, rec)
        ncc = tmp_path / "tail.ncc"
        out = tmp_path / "tail_out.ncr"
        assert main(["compress", str(src), str(ncc), "--codec", "spiht2d",
                     "--bps", "4", "--levels", "2", "--window", "1024"]) == 0
        assert main(["decompress", str(ncc), str(out)]) == 0
        assert read_raw(out).samples.data.shape == (4, 2058)

    def test_deterministic_output(self, tmp_path, raw_input):
        a, b = tmp_path / "a.ncc", tmp_path / "b.ncc"
        for target in (a, b):
            assert main(["compress", str(raw_input), str(target),
                         "--codec", "spiht2d", "--bps", "2", "--levels", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_defaults(self, tmp_path, raw_input):
        conf = tmp_path / "run.conf"
        conf.write_text("codec=spiht2d\nbps=2\nlevels=2\n")
        ncc = tmp_path / "c.ncc"
        assert main(["compress", str(raw_input), str(ncc), "--config", str(conf)]) == 0
        assert read_records(ncc)[0].codec_id == 1
        assert read_records(ncc)[0].levels == 2

    def test_windowed_records(self, tmp_path, raw_input):
        ncc = tmp_path / "w.ncc"
        assert main(["compress", str(raw_input), str(ncc), "--codec", "spiht2d",
                     "--bps", "2", "--levels", "2", "--window", "2048"]) == 0
        assert len(read_records(ncc)) == 2


class TestDecompress:
    def test_truncated_payload_best_effort(self, tmp_path, raw_input, capsys):
        ncc = tmp_path / "t.ncc"
        main(["compress", str(raw_input), str(ncc), "--codec", "spiht2d",
              "--bps", "4", "--levels", "2"])
        blob = ncc.read_bytes()
        ncc.write_bytes(blob[:-200])
        out = tmp_path / "t.ncr"
        assert main(["decompress", str(ncc), str(out)]) == 0
        assert "warning" in capsys.readouterr().err
        assert read_raw(out).samples.data.shape == (4, 4096)

    def test_corrupt_container(self, tmp_path):
        bad = tmp_path / "bad.ncc"
        bad.write_bytes(b"WRONG" + bytes(100))
        assert main(["decompress", str(bad), str(tmp_path / "o.ncr")]) == 2


class TestEvaluate:
    def test_metrics_only(self, tmp_path, raw_input, capsys):
        ncc = tmp_path / "e.ncc"
        main(["compress", str(raw_input), str(ncc), "--codec", "spiht2d",
              "--bps", "4", "--levels", "2"])
        capsys.readouterr()
        assert main(["evaluate", str(raw_input), str(ncc)]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("patient,prd,achieved_bps,cr")

    def test_identical_files_prd_zero(self, tmp_path, raw_input, capsys):
        assert main(["evaluate", str(raw_input), str(raw_input)]) == 0
        header, row = capsys.readouterr().out.splitlines()[:2]
        assert float(row.split(",")[1]) == 0.0

    def test_zero_reference_is_metric_error(self, tmp_path):
        rec = Recording("z", ["a"], 256, SignalMatrix(np.zeros((1, 512)) + 0))
        path = tmp_path / "z.ncr"
        write_raw(path, rec)
        assert main(["evaluate", str(path), str(path)]) == 4

    def test_flags_report(self, tmp_path, capsys):
        rec = burst_recording(n_channels=2, dur_s=300)
        src = tmp_path / "b.ncr"
        write_raw(src, rec)
        ncc = tmp_path / "b.ncc"
        main(["compress", str(src), str(ncc), "--codec", "dictionary", "--bps", "4"])
        report = tmp_path / "rep.csv"
        plot = tmp_path / "plot.csv"
        assert main(["evaluate", str(src), str(ncc), "--flags",
                     "--report", str(report), "--plot-data", str(plot)]) == 0
        text = report.read_text()
        assert "tp_percent" in text
        assert plot.read_text().startswith("prd,tp_percent")

    def test_missing_args_usage(self):
        assert main(["evaluate"]) == 1

    def test_edf_input(self, tmp_path, capsys):
        x = smooth_eeg(3, 1024, seed=42)
        rec = Recording("edfpt", ["FP1-F7", "F7-T7", "T7-P7"], 256, SignalMatrix(x))
        src = tmp_path / "e.edf"
        write_edf(src, rec)
        ncc = tmp_path / "e.ncc"
        assert main(["compress", str(src), str(ncc), "--codec", "dictionary",
                     "--bps", "4"]) == 0
        assert main(["evaluate", str(src), str(ncc)]) == 0

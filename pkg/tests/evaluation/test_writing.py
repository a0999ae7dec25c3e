import csv
import io

import numpy as np
import pytest
import yaml

from jrcsim.evaluation.montecarlo import SweepPoint, SweepResult
from jrcsim.evaluation.stats import PointAccumulator
from jrcsim.evaluation.writing import (
    DETECTION_COLUMNS,
    SWEEP_COLUMNS,
    ArtifactSet,
    ConsoleFormatter,
    CSVFormatter,
    config_snapshot,
)
from jrcsim.exceptions import OutputError
from jrcsim.phy.radar_receiver import RangeDopplerMap, TargetEstimate

from tests.utils import SAMPLE_RATE_HZ, small_config


def _sweep():
    totals = PointAccumulator(3, 1, 123, 12, 345, 1200, 2400)
    points = (
        SweepPoint(0.0, 0.5, 0.01, 1e-1, 1e-2, 3, 0.05, 0.2, totals),
        SweepPoint(10.0, 0.1 / 3, 0.002, 1e-3, 1e-4, 3),
    )
    return SweepResult(points, small_config().to_dict())


def _estimate(delay_bin=4, gain=0.5 - 0.25j):
    return TargetEstimate(
        delay_bin=delay_bin,
        doppler_bin=-1,
        delay_s=delay_bin / SAMPLE_RATE_HZ,
        doppler_hz=-26e3,
        gain_hat=gain,
        peak_power_db=31.5,
    )


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


class TestCSVFormatter:

    def test_sweep_columns(self):
        rows = _rows(CSVFormatter().format_sweep(_sweep()))
        assert rows[0] == SWEEP_COLUMNS
        assert len(rows) == 3
        assert rows[1] == ["0.0", "0.5", "0.01", "0.1", "0.01", "3"]

    def test_floats_round_trip(self):
        rows = _rows(CSVFormatter().format_sweep(_sweep()))
        assert float(rows[2][1]) == 0.1 / 3

    def test_detections(self):
        text = CSVFormatter().format_detections([_estimate(), _estimate(9)])
        rows = _rows(text)
        assert rows[0] == DETECTION_COLUMNS
        assert rows[1][:2] == ["4", "-1"]
        assert float(rows[1][5]) == 0.5
        assert float(rows[1][6]) == -0.25
        assert rows[2][0] == "9"

    def test_detections_header_only(self):
        text = CSVFormatter().format_detections([])
        assert text == ",".join(DETECTION_COLUMNS) + "\n"

    def test_range_doppler_grid(self):
        power = np.full((5, 4), 10.0)
        power[2, 1] = 1000.0
        rd_map = RangeDopplerMap(power, SAMPLE_RATE_HZ, 2.4e-6)
        rows = _rows(CSVFormatter().format_range_doppler(rd_map))
        assert rows[0] == [
            "range_bin",
            "range_m",
            "doppler_-2",
            "doppler_-1",
            "doppler_0",
            "doppler_1",
        ]
        assert len(rows) == 6
        assert float(rows[3][3]) == pytest.approx(30.0)
        assert float(rows[1][2]) == pytest.approx(10.0)


class TestConsoleFormatter:

    def test_sweep_table(self):
        text = ConsoleFormatter().format_sweep(_sweep())
        assert "Monte-Carlo sweep" in text
        assert "SNR gap at BER 1e-2" in text
        assert "5.00 dB" in text

    def test_sweep_uncertainty_and_raw_ber(self):
        text = ConsoleFormatter().format_sweep(_sweep())
        assert "1.0000e-01 ± 5.0e-02" in text
        assert "2.0000e-01" in text
        assert "Raw coded BER" in text

    def test_pooled_counts(self):
        text = ConsoleFormatter().format_sweep(_sweep())
        assert "Pooled error counts" in text
        assert "1.0250e-01" in text
        assert "1.0000e-02" in text
        assert "345/2400" in text

    def test_sweep_without_crossing(self):
        points = (SweepPoint(0.0, 0.5, 0.0, 0.3, 0.2, 2),)
        text = ConsoleFormatter().format_sweep(SweepResult(points, {}))
        assert "not crossed" in text

    def test_detections_table(self):
        text = ConsoleFormatter().format_detections([_estimate()])
        assert "Detected targets" in text
        assert "0.559" in text

    def test_no_detections(self):
        text = ConsoleFormatter().format_detections([])
        assert "No targets detected." in text


class TestArtifactSet:

    def test_commit_writes_everything(self, tmp_path):
        artifacts = ArtifactSet(tmp_path / "out")
        artifacts.add("a.csv", "x\n1\n")
        artifacts.add("b.png", lambda: b"\x89PNG")
        written = artifacts.commit()
        assert [p.name for p in written] == ["a.csv", "b.png"]
        assert (tmp_path / "out" / "a.csv").read_text() == "x\n1\n"
        assert (tmp_path / "out" / "b.png").read_bytes() == b"\x89PNG"

    def test_failed_write_removes_partial_output(self, tmp_path):
        artifacts = ArtifactSet(tmp_path)
        artifacts.add("first.csv", "a\n")
        artifacts.add("missing/second.csv", "b\n")
        with pytest.raises(OutputError, match="Cannot write"):
            artifacts.commit()
        assert not (tmp_path / "first.csv").exists()

    def test_failed_render_removes_partial_output(self, tmp_path):
        def fail():
            raise OutputError("no plotting backend")

        artifacts = ArtifactSet(tmp_path)
        artifacts.add("first.csv", "a\n")
        artifacts.add("plot.png", fail)
        with pytest.raises(OutputError, match="plotting"):
            artifacts.commit()
        assert list(tmp_path.iterdir()) == []

    def test_directory_under_a_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        artifacts = ArtifactSet(blocker / "out")
        artifacts.add("a.csv", "x\n")
        with pytest.raises(OutputError):
            artifacts.commit()


def test_config_snapshot_is_loadable():
    config = small_config()
    loaded = yaml.safe_load(config_snapshot(config.to_dict()))
    assert loaded == config.to_dict()

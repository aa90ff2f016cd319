"""CSV and JSON round-trips with exact value fidelity."""

from datetime import datetime

import numpy as np
import pytest

from timescales import (
    DAILY,
    HOURLY,
    StationPanel,
    TimeSeries,
    read_json,
    read_panel_csv,
    read_series_csv,
    write_json,
    write_panel_csv,
    write_series_csv,
)
from timescales.io import jsonable_floats

MIDNIGHT = datetime(2000, 1, 3)


class TestSeriesCsv:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        for trial in range(5):
            values = rng.normal(size=40)
            values[rng.random(40) < 0.2] = np.nan
            ts = TimeSeries(start=MIDNIGHT, step=DAILY, values=values, name="pm10")
            path = tmp_path / f"s{trial}.csv"
            write_series_csv(path, ts)
            back = read_series_csv(path)
            assert back.name == "pm10"
            assert back.start == ts.start
            assert back.step == DAILY
            assert np.array_equal(back.values, ts.values, equal_nan=True)

    def test_missing_encoded_as_na_token(self, tmp_path):
        ts = TimeSeries(start=MIDNIGHT, step=DAILY,
                        values=[1.5, np.nan], name="x")
        path = tmp_path / "na.csv"
        write_series_csv(path, ts)
        text = path.read_text()
        assert "NA" in text.splitlines()[2]
        assert text.splitlines()[0] == "date,x"

    def test_hourly_timestamps(self, tmp_path):
        ts = TimeSeries(start=datetime(2000, 1, 3, 22), step=HOURLY,
                        values=[1.0, 2.0, 3.0], name="x")
        path = tmp_path / "h.csv"
        write_series_csv(path, ts)
        lines = path.read_text().splitlines()
        assert lines[1].startswith("2000-01-03T22:00,")
        back = read_series_csv(path)
        assert back.step == HOURLY
        assert back.start == ts.start

    def test_blank_field_reads_as_missing(self, tmp_path):
        path = tmp_path / "blank.csv"
        path.write_text("date,x\n2000-01-03,1.0\n2000-01-04,\n")
        back = read_series_csv(path)
        assert np.isnan(back.values[1])

    def test_irregular_spacing_rejected(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("date,x\n2000-01-03,1.0\n2000-01-05,2.0\n2000-01-06,3.0\n")
        with pytest.raises(ValueError, match="NA"):
            read_series_csv(path)

    def test_header_and_field_count_validated(self, tmp_path):
        path = tmp_path / "badhead.csv"
        path.write_text("time,x\n2000-01-03,1.0\n")
        with pytest.raises(ValueError):
            read_series_csv(path)
        path2 = tmp_path / "ragged.csv"
        path2.write_text("date,x\n2000-01-03,1.0,9.9\n")
        with pytest.raises(ValueError):
            read_series_csv(path2)


class TestPanelCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        matrix = rng.normal(size=(20, 3))
        matrix[3, 1] = np.nan
        series = tuple(
            TimeSeries(start=MIDNIGHT, step=DAILY, values=matrix[:, j],
                       name=f"st{j}")
            for j in range(3)
        )
        panel = StationPanel(series=series, station_ids=("st0", "st1", "st2"))
        path = tmp_path / "panel.csv"
        write_panel_csv(path, panel)
        back = read_panel_csv(path)
        assert back.station_ids == ("st0", "st1", "st2")
        assert np.array_equal(back.as_matrix(), matrix, equal_nan=True)


class TestJson:
    def test_round_trip_sorted_and_newline_terminated(self, tmp_path):
        path = tmp_path / "x.json"
        write_json(path, {"b": 2, "a": [1.5, None, "s"]})
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")
        assert read_json(path) == {"b": 2, "a": [1.5, None, "s"]}

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_json(tmp_path / "bad.json", {"x": float("nan")})

    def test_jsonable_floats_converts_numpy(self):
        out = jsonable_floats({
            "a": np.float64(1.5),
            "b": np.int64(2),
            "c": np.array([1.0, 2.0]),
            "d": (np.bool_(True), {"e": np.float32(0.5)}),
        })
        assert out == {"a": 1.5, "b": 2, "c": [1.0, 2.0], "d": [True, {"e": 0.5}]}
        assert isinstance(out["a"], float)
        assert isinstance(out["b"], int)
        assert isinstance(out["d"][0], bool)

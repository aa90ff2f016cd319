"""Container invariants and the raw-to-daily preprocessing chain."""

import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from timescales import (
    BI_HOURLY,
    DAILY,
    HOURLY,
    StationPanel,
    TimeSeries,
    aggregate_daily,
    impute_causal_ma,
    impute_causal_ma_details,
    screen_outliers,
    spatial_average,
)

MIDNIGHT = datetime(2000, 1, 3)


def hourly(values, start=MIDNIGHT, name="x"):
    return TimeSeries(start=start, step=HOURLY, values=values, name=name)


def daily(values, start=MIDNIGHT, name="x"):
    return TimeSeries(start=start, step=DAILY, values=values, name=name)


class TestTimeSeries:
    def test_basic_fields(self):
        ts = daily([1.0, 2.0, np.nan])
        assert ts.n == 3
        assert ts.n_missing == 1
        assert not ts.is_complete()
        assert ts.is_daily
        assert ts.timestamps() == [MIDNIGHT, MIDNIGHT + DAILY, MIDNIGHT + 2 * DAILY]

    def test_values_are_float64_copies(self):
        raw = np.array([1, 2, 3])
        ts = daily(raw)
        assert ts.values.dtype == np.float64
        raw[0] = 99
        assert ts.values[0] == 1.0

    def test_rejects_bad_shapes_and_infinities(self):
        with pytest.raises(ValueError):
            daily([[1.0, 2.0]])
        with pytest.raises(ValueError):
            daily([])
        with pytest.raises(ValueError):
            daily([1.0, np.inf])

    def test_daily_must_start_at_midnight(self):
        with pytest.raises(ValueError):
            TimeSeries(start=datetime(2000, 1, 3, 8), step=DAILY,
                       values=[1.0], name="x")

    def test_rejects_unknown_step(self):
        with pytest.raises(ValueError):
            TimeSeries(start=MIDNIGHT, step=timedelta(minutes=7),
                       values=[1.0], name="x")

    def test_with_values_keeps_frame(self):
        ts = daily([1.0, 2.0, 3.0])
        out = ts.with_values([4.0, 5.0, 6.0], name="y")
        assert out.start == ts.start
        assert out.step == ts.step
        assert out.name == "y"
        assert np.array_equal(out.values, [4.0, 5.0, 6.0])
        with pytest.raises(ValueError):
            ts.with_values([1.0])


class TestStationPanel:
    def test_alignment_enforced(self):
        a = daily([1.0, 2.0])
        b = daily([3.0, 4.0])
        panel = StationPanel(series=(a, b), station_ids=("s1", "s2"))
        assert panel.n_stations == 2
        assert panel.n == 2
        assert panel.start == MIDNIGHT
        with pytest.raises(ValueError):
            StationPanel(series=(a, daily([1.0, 2.0, 3.0])),
                         station_ids=("s1", "s2"))
        with pytest.raises(ValueError):
            StationPanel(series=(a, b), station_ids=("s1", "s1"))

    def test_matrix_round_trip(self):
        a = daily([1.0, 2.0])
        b = daily([3.0, np.nan])
        panel = StationPanel(series=(a, b), station_ids=("s1", "s2"))
        m = panel.as_matrix()
        assert m.shape == (2, 2)
        assert m[0, 1] == 3.0
        other = panel.with_matrix(m + 1.0)
        assert other.series[0].values[0] == 2.0
        assert other.station_ids == ("s1", "s2")


class TestAggregateDaily:
    def test_full_days_mean(self):
        values = np.arange(48, dtype=float)
        out = aggregate_daily(hourly(values))
        assert out.step == DAILY
        assert out.n == 2
        assert out.values[0] == np.mean(values[:24])
        assert out.values[1] == np.mean(values[24:])

    def test_availability_rule_boundary(self):
        # 18 of 24 samples is exactly 75 percent, so the day must survive.
        values = np.arange(24, dtype=float)
        values[:6] = np.nan
        out = aggregate_daily(hourly(values), 0.75)
        assert math.isclose(out.values[0], np.nanmean(values))
        # 17 of 24 falls below the threshold and blanks the day.
        values[6] = np.nan
        out = aggregate_daily(hourly(values), 0.75)
        assert np.isnan(out.values[0])

    def test_partial_edge_days_dropped(self):
        # Start at 06:00: the first 18 samples cannot form a whole day.
        start = MIDNIGHT + timedelta(hours=6)
        values = np.arange(18 + 24, dtype=float)
        out = aggregate_daily(TimeSeries(start=start, step=HOURLY,
                                         values=values, name="x"))
        assert out.n == 1
        assert out.start == MIDNIGHT + DAILY
        assert out.values[0] == np.mean(values[18:])

    def test_bi_hourly_step(self):
        values = np.arange(24, dtype=float)
        out = aggregate_daily(TimeSeries(start=MIDNIGHT, step=BI_HOURLY,
                                         values=values, name="x"))
        assert out.n == 2
        assert out.values[0] == np.mean(values[:12])

    def test_rejects_daily_input_and_bad_threshold(self):
        with pytest.raises(ValueError):
            aggregate_daily(daily([1.0, 2.0]))
        with pytest.raises(ValueError):
            aggregate_daily(hourly(np.arange(24.0)), 0.0)
        with pytest.raises(ValueError):
            aggregate_daily(hourly(np.arange(24.0)), 1.5)

    def test_no_whole_day_is_an_error(self):
        with pytest.raises(ValueError):
            aggregate_daily(hourly(np.arange(5.0),
                                   start=MIDNIGHT + timedelta(hours=6)))


class TestSpatialAverage:
    def test_rowwise_nonmissing_mean(self):
        a = daily([1.0, np.nan, np.nan])
        b = daily([3.0, 5.0, np.nan])
        panel = StationPanel(series=(a, b), station_ids=("s1", "s2"))
        out = spatial_average(panel, name="avg")
        assert out.name == "avg"
        assert out.values[0] == 2.0
        assert out.values[1] == 5.0
        assert np.isnan(out.values[2])

    def test_commutes_with_station_permutation(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            matrix = rng.normal(size=(30, 4))
            matrix[rng.random(size=matrix.shape) < 0.2] = np.nan
            series = tuple(daily(matrix[:, j], name=f"s{j}") for j in range(4))
            ids = tuple(f"s{j}" for j in range(4))
            base = spatial_average(StationPanel(series=series, station_ids=ids))
            perm = rng.permutation(4)
            shuffled = StationPanel(
                series=tuple(series[j] for j in perm),
                station_ids=tuple(ids[j] for j in perm),
            )
            out = spatial_average(shuffled)
            both = np.isfinite(base.values) == np.isfinite(out.values)
            assert both.all()
            finite = np.isfinite(base.values)
            # Summation order may differ by one ulp after permutation.
            assert np.allclose(base.values[finite], out.values[finite],
                               rtol=1e-13, atol=0.0)


class TestImputeCausalMa:
    def test_fills_from_trailing_window_mean(self):
        values = [10.0, 20.0, np.nan, 40.0]
        out = impute_causal_ma(daily(values), window_days=15)
        assert out.is_complete()
        assert out.values[2] == 15.0
        assert out.values[3] == 40.0

    def test_window_limits_lookback(self):
        values = [100.0, 1.0, 3.0, np.nan]
        out = impute_causal_ma(daily(values), window_days=2)
        assert out.values[3] == 2.0

    def test_already_imputed_values_count_as_available(self):
        values = [10.0, np.nan, np.nan]
        out = impute_causal_ma(daily(values), window_days=15)
        assert out.values[1] == 10.0
        assert out.values[2] == 10.0

    def test_leading_missing_falls_back_to_series_median(self):
        values = [np.nan, 1.0, 2.0, 9.0]
        filled, report = impute_causal_ma_details(daily(values), 15)
        assert filled.values[0] == 2.0
        assert report["fallback_indices"] == [0]
        assert report["imputed_indices"] == [0]
        assert report["window_days"] == 15

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            values = rng.normal(size=60)
            values[rng.random(60) < 0.3] = np.nan
            ts = daily(values)
            once = impute_causal_ma(ts, 15)
            twice = impute_causal_ma(once, 15)
            assert np.array_equal(once.values, twice.values)

    def test_complete_series_unchanged(self):
        ts = daily([1.0, 2.0, 3.0])
        out, report = impute_causal_ma_details(ts, 15)
        assert np.array_equal(out.values, ts.values)
        assert report["imputed_indices"] == []

    def test_rejects_bad_window_and_all_missing(self):
        with pytest.raises(ValueError):
            impute_causal_ma(daily([1.0, np.nan]), 0)
        with pytest.raises(ValueError):
            impute_causal_ma(daily([np.nan, np.nan]), 15)


class TestScreenOutliers:
    def build_panel(self, matrix):
        series = tuple(daily(matrix[:, j], name=f"s{j}")
                       for j in range(matrix.shape[1]))
        ids = tuple(f"s{j}" for j in range(matrix.shape[1]))
        return StationPanel(series=series, station_ids=ids)

    def test_matches_direct_mahalanobis_ranking(self):
        rng = np.random.default_rng(3)
        matrix = rng.normal(size=(60, 3))
        matrix[7] += 9.0
        matrix[31] -= 7.0
        panel = self.build_panel(matrix)
        screened, report = screen_outliers(panel, 2)

        mean = matrix.mean(axis=0)
        cov = np.cov(matrix, rowvar=False, ddof=1)
        centered = matrix - mean
        d2 = np.einsum("ij,ij->i", centered,
                       np.linalg.solve(cov, centered.T).T)
        expected = set(np.argsort(-d2)[:2])
        removed = {r.index for r in report.removed}
        assert removed == expected == {7, 31}
        for r in report.removed:
            assert math.isclose(r.distance, d2[r.index], rel_tol=1e-10)

    def test_retained_values_unchanged(self):
        rng = np.random.default_rng(9)
        matrix = rng.normal(size=(40, 2))
        panel = self.build_panel(matrix)
        screened, report = screen_outliers(panel, 3)
        out = screened.as_matrix()
        removed = [r.index for r in report.removed]
        assert np.all(np.isnan(out[removed]))
        keep = np.setdiff1d(np.arange(40), removed)
        assert np.array_equal(out[keep], matrix[keep])

    def test_incomplete_rows_never_ranked(self):
        rng = np.random.default_rng(4)
        matrix = rng.normal(size=(50, 2))
        matrix[0, 0] = np.nan
        matrix[0, 1] = 1e6
        panel = self.build_panel(matrix)
        screened, report = screen_outliers(panel, 1)
        assert all(r.index != 0 for r in report.removed)
        assert report.n_complete == 49

    def test_zero_removals_is_identity(self):
        matrix = np.ones((5, 2))
        panel = self.build_panel(matrix)
        screened, report = screen_outliers(panel, 0)
        assert np.array_equal(screened.as_matrix(), matrix)
        assert report.removed == ()

    def test_report_serializes(self):
        rng = np.random.default_rng(2)
        panel = self.build_panel(rng.normal(size=(30, 2)))
        _, report = screen_outliers(panel, 2)
        d = report.to_dict()
        assert d["n_complete"] == 30
        assert len(d["removed"]) == 2
        assert {"index", "date", "squared_distance"} <= set(d["removed"][0])

    def test_errors(self):
        rng = np.random.default_rng(6)
        panel = self.build_panel(rng.normal(size=(20, 2)))
        with pytest.raises(ValueError):
            screen_outliers(panel, -1)
        with pytest.raises(ValueError):
            screen_outliers(panel, 20)
        constant = self.build_panel(np.ones((10, 2)))
        with pytest.raises(ValueError):
            screen_outliers(constant, 1)

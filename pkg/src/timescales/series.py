"""Regularly sampled series containers and day-level preprocessing.

The containers are thin frozen dataclasses around float64 arrays; missing
values are NaN.  Operations cover the path from raw sub-daily station
records to a complete daily series: daily aggregation with an availability
threshold, spatial averaging across stations, causal moving-average
imputation, and multivariate outlier screening.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, time, timedelta

import numpy as np
from scipy.linalg import cho_factor, cho_solve

HOURLY = timedelta(hours=1)
BI_HOURLY = timedelta(hours=2)
DAILY = timedelta(days=1)

_ALLOWED_STEPS = (HOURLY, BI_HOURLY, DAILY)


def _as_float_vector(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"values must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("values must be non-empty")
    if np.any(np.isinf(arr)):
        raise ValueError("values must be finite or NaN")
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A regularly sampled series; NaN marks missing observations.

    Parameters
    ----------
    start : datetime
        Timestamp of the first sample.  Daily series must start at midnight.
    step : timedelta
        Sampling step; one of HOURLY, BI_HOURLY, DAILY.
    values : np.ndarray
        Float vector of observations, NaN where missing.
    name : str
        Variable name used in CSV headers and reports.
    """

    start: datetime
    step: timedelta
    values: np.ndarray
    name: str = "value"

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_vector(self.values))
        if self.step not in _ALLOWED_STEPS:
            raise ValueError(
                f"step must be 1h, 2h, or 24h, got {self.step}"
            )
        if not isinstance(self.start, datetime):
            raise TypeError("start must be a datetime")
        if self.step == DAILY and self.start.time() != time(0, 0):
            raise ValueError(
                f"daily series must start at midnight, got {self.start.time()}"
            )

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def is_daily(self) -> bool:
        return self.step == DAILY

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())

    def is_complete(self) -> bool:
        return not bool(np.isnan(self.values).any())

    def timestamps(self) -> list[datetime]:
        return [self.start + i * self.step for i in range(self.n)]

    def with_values(self, values, name: str | None = None) -> "TimeSeries":
        values = _as_float_vector(values)
        if values.size != self.n:
            raise ValueError(
                f"replacement has {values.size} values, series has {self.n}"
            )
        return TimeSeries(
            start=self.start,
            step=self.step,
            values=values,
            name=self.name if name is None else name,
        )


@dataclass(frozen=True, eq=False)
class StationPanel:
    """Aligned series for one variable measured at several stations."""

    series: tuple[TimeSeries, ...]
    station_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "station_ids", tuple(str(s) for s in self.station_ids))
        if not self.series:
            raise ValueError("panel needs at least one station")
        if len(self.series) != len(self.station_ids):
            raise ValueError(
                f"{len(self.series)} series but {len(self.station_ids)} station ids"
            )
        if len(set(self.station_ids)) != len(self.station_ids):
            raise ValueError("station ids must be unique")
        first = self.series[0]
        for ts, sid in zip(self.series, self.station_ids):
            if ts.start != first.start or ts.step != first.step or ts.n != first.n:
                raise ValueError(
                    f"station {sid!r} is not aligned with station "
                    f"{self.station_ids[0]!r} (start/step/length must match)"
                )

    @property
    def n_stations(self) -> int:
        return len(self.series)

    @property
    def start(self) -> datetime:
        return self.series[0].start

    @property
    def step(self) -> timedelta:
        return self.series[0].step

    @property
    def n(self) -> int:
        return self.series[0].n

    def as_matrix(self) -> np.ndarray:
        """Rows are time points, columns are stations."""
        return np.column_stack([ts.values for ts in self.series])

    def with_matrix(self, matrix: np.ndarray) -> "StationPanel":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (self.n, self.n_stations):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match panel "
                f"({self.n}, {self.n_stations})"
            )
        new_series = tuple(
            ts.with_values(matrix[:, j]) for j, ts in enumerate(self.series)
        )
        return StationPanel(series=new_series, station_ids=self.station_ids)


@dataclass(frozen=True, eq=False)
class ExposureSet:
    """Named, aligned exposure variables extracted from one series.

    values has shape (n_exposures, n); meta holds one dict per exposure
    (periods, member indices, band edges, and similar provenance fields).
    """

    names: tuple[str, ...]
    values: np.ndarray
    meta: tuple[dict, ...] = ()
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)
        if len(self.names) != vals.shape[0]:
            raise ValueError(
                f"{len(self.names)} names but {vals.shape[0]} value rows"
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError("exposure names must be unique")
        meta = tuple(self.meta) if self.meta else tuple({} for _ in self.names)
        if len(meta) != len(self.names):
            raise ValueError(f"{len(meta)} meta entries but {len(self.names)} names")
        object.__setattr__(self, "meta", meta)

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: self.values[i] for i, name in enumerate(self.names)}


def aggregate_daily(ts: TimeSeries, availability_threshold: float = 0.75) -> TimeSeries:
    """Collapse a sub-daily series to daily means, midnight to midnight.

    A day's mean is computed over its non-missing samples when their
    fraction of the day's full sample count is at least
    ``availability_threshold``; otherwise the day is NaN.  Partial first
    and last days (fewer slots than a full day) are dropped entirely.
    """
    if ts.step == DAILY:
        raise ValueError("series is already daily; aggregation needs sub-daily input")
    if not (0.0 < availability_threshold <= 1.0):
        raise ValueError(
            f"availability_threshold must be in (0, 1], got {availability_threshold}"
        )
    per_day = int(DAILY // ts.step)
    step_minutes = int(ts.step.total_seconds() // 60)
    start_minutes = ts.start.hour * 60 + ts.start.minute
    if ts.start.second or ts.start.microsecond:
        raise ValueError("start must fall on a whole minute")

    idx = np.arange(ts.n)
    day_offset = (start_minutes + idx * step_minutes) // (24 * 60)
    slot_counts = np.bincount(day_offset)
    whole = np.flatnonzero(slot_counts == per_day)
    if whole.size == 0:
        raise ValueError(
            f"series spans no whole day ({ts.n} samples at step {ts.step})"
        )

    finite = np.isfinite(ts.values)
    avail = np.bincount(day_offset, weights=finite.astype(float))
    sums = np.bincount(day_offset, weights=np.where(finite, ts.values, 0.0))

    out = np.full(whole.size, np.nan)
    ok = avail[whole] / per_day >= availability_threshold
    with np.errstate(invalid="ignore"):
        means = sums[whole] / avail[whole]
    out[ok] = means[ok]

    first_day = datetime.combine(ts.start.date() + timedelta(days=int(whole[0])),
                                 time(0, 0))
    return TimeSeries(start=first_day, step=DAILY, values=out, name=ts.name)


def spatial_average(panel: StationPanel, name: str | None = None) -> TimeSeries:
    """Average the panel across stations, per time point, over non-missing
    stations only.  A time point with no station reporting stays NaN."""
    matrix = panel.as_matrix()
    finite = np.isfinite(matrix)
    counts = finite.sum(axis=1)
    sums = np.where(finite, matrix, 0.0).sum(axis=1)
    out = np.full(panel.n, np.nan)
    has = counts > 0
    out[has] = sums[has] / counts[has]
    return TimeSeries(
        start=panel.start,
        step=panel.step,
        values=out,
        name=panel.series[0].name if name is None else name,
    )


def _impute_with_flags(values: np.ndarray, window: int) -> tuple[np.ndarray, list[int], list[int]]:
    """Fill NaNs left to right with the mean of the previous ``window``
    entries (already filled entries count); an empty window falls back to
    the median of the originally observed values.

    Returns (filled values, imputed indices, fallback indices).
    """
    observed = values[np.isfinite(values)]
    if observed.size == 0:
        raise ValueError("cannot impute a series with no observed values")
    fallback = float(np.median(observed))
    out = values.copy()
    imputed: list[int] = []
    fallback_used: list[int] = []
    for t in np.flatnonzero(~np.isfinite(values)):
        t = int(t)
        lo = max(0, t - window)
        win = out[lo:t]
        if win.size == 0:
            out[t] = fallback
            fallback_used.append(t)
        else:
            out[t] = win.mean()
        imputed.append(t)
    return out, imputed, fallback_used


def impute_causal_ma(ts: TimeSeries, window_days: int = 15) -> TimeSeries:
    """Fill missing daily values with the mean of the preceding
    ``window_days`` values, scanning forward so earlier imputations feed
    later windows.  Leading missings with an empty window get the median
    of the observed values."""
    filled, _ = impute_causal_ma_details(ts, window_days)
    return filled


def impute_causal_ma_details(
    ts: TimeSeries, window_days: int = 15
) -> tuple[TimeSeries, dict]:
    """Like impute_causal_ma, but also reports which indices were filled
    and which of those needed the median fallback."""
    if not ts.is_daily:
        raise ValueError("causal imputation expects a daily series")
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    filled, imputed, fallback = _impute_with_flags(ts.values, int(window_days))
    report = {
        "window_days": int(window_days),
        "imputed_indices": imputed,
        "fallback_indices": fallback,
    }
    return ts.with_values(filled), report


@dataclass(frozen=True, eq=False)
class RemovedDay:
    """One screened-out day: row index, timestamp, squared distance."""

    index: int
    timestamp: datetime
    distance: float


@dataclass(frozen=True, eq=False)
class OutlierReport:
    removed: tuple[RemovedDay, ...]
    n_complete: int
    station_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "n_complete": self.n_complete,
            "station_ids": list(self.station_ids),
            "removed": [
                {
                    "index": r.index,
                    "date": r.timestamp.date().isoformat(),
                    "squared_distance": r.distance,
                }
                for r in self.removed
            ],
        }


def screen_outliers(
    panel: StationPanel, remove_count: int = 5
) -> tuple[StationPanel, OutlierReport]:
    """Blank the ``remove_count`` most extreme complete days of the panel.

    Extremeness is the squared Mahalanobis distance of the day's station
    vector from the mean of complete days, under the sample covariance of
    complete days.  Removed days become NaN across every station.  Days
    with any missing station never enter the ranking.
    """
    if remove_count < 0:
        raise ValueError(f"remove_count must be >= 0, got {remove_count}")
    complete_rows = np.flatnonzero(np.isfinite(panel.as_matrix()).all(axis=1))
    report_stub = OutlierReport(
        removed=(), n_complete=int(complete_rows.size), station_ids=panel.station_ids
    )
    if remove_count == 0:
        return panel, report_stub

    matrix = panel.as_matrix()
    k = panel.n_stations
    m = complete_rows.size
    if m <= k:
        raise ValueError(
            f"need more complete days than stations to estimate covariance "
            f"({m} complete days, {k} stations)"
        )
    if remove_count >= m:
        raise ValueError(
            f"remove_count={remove_count} would blank all {m} complete days"
        )
    rows = matrix[complete_rows]
    mean = rows.mean(axis=0)
    cov = np.cov(rows, rowvar=False, ddof=1).reshape(k, k)
    try:
        factor = cho_factor(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "station covariance is singular; screening needs linearly "
            "independent station variation"
        ) from exc
    centered = rows - mean
    d2 = np.einsum("ij,ij->i", centered, cho_solve(factor, centered.T).T)

    order = np.lexsort((complete_rows, -d2))
    chosen = order[:remove_count]
    chosen_global = complete_rows[chosen]
    keep_order = np.argsort(chosen_global)

    out_matrix = matrix.copy()
    out_matrix[chosen_global, :] = np.nan
    removed = tuple(
        RemovedDay(
            index=int(chosen_global[i]),
            timestamp=panel.start + int(chosen_global[i]) * panel.step,
            distance=float(d2[chosen[i]]),
        )
        for i in keep_order
    )
    report = OutlierReport(
        removed=removed, n_complete=m, station_ids=panel.station_ids
    )
    return panel.with_matrix(out_matrix), report

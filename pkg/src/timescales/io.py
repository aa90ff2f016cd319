"""CSV and JSON reading/writing with a fixed, reproducible format.

Series CSVs have a ``date`` column plus one value column per variable or
station.  Dates are ISO-8601: ``YYYY-MM-DD`` for daily data,
``YYYY-MM-DDTHH:MM`` for sub-daily.  Missing values are written as ``NA``
and read from ``NA`` or an empty field.  All files are UTF-8 with LF line
endings; floats are written with repr so round-trips are exact.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, time, timedelta
from pathlib import Path

import numpy as np

from .series import DAILY, StationPanel, TimeSeries

NA_TOKEN = "NA"


def format_value(x: float) -> str:
    xf = math.nan if x is None else float(x)
    if math.isnan(xf):
        return NA_TOKEN
    return repr(xf)


def parse_value(token: str) -> float:
    token = token.strip()
    if token == "" or token == NA_TOKEN:
        return math.nan
    try:
        return float(token)
    except ValueError as exc:
        raise ValueError(f"unparseable numeric field {token!r}") from exc


def format_timestamp(stamp: datetime, step: timedelta) -> str:
    if step == DAILY:
        return stamp.date().isoformat()
    return stamp.strftime("%Y-%m-%dT%H:%M")


def parse_timestamp(token: str) -> datetime:
    token = token.strip()
    try:
        if "T" in token:
            return datetime.strptime(token, "%Y-%m-%dT%H:%M")
        return datetime.combine(
            datetime.strptime(token, "%Y-%m-%d").date(), time(0, 0)
        )
    except ValueError as exc:
        raise ValueError(
            f"unparseable date {token!r}; expected YYYY-MM-DD or YYYY-MM-DDTHH:MM"
        ) from exc


def _open_write(path):
    return open(path, "w", encoding="utf-8", newline="")


def write_series_csv(path, ts: TimeSeries) -> None:
    with _open_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", ts.name])
        stamp = ts.start
        for value in ts.values:
            writer.writerow([format_timestamp(stamp, ts.step), format_value(value)])
            stamp = stamp + ts.step


def write_panel_csv(path, panel: StationPanel) -> None:
    with _open_write(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *panel.station_ids])
        matrix = panel.as_matrix()
        stamp = panel.start
        for row in matrix:
            writer.writerow(
                [format_timestamp(stamp, panel.step)]
                + [format_value(v) for v in row]
            )
            stamp = stamp + panel.step


def _read_table(path) -> tuple[list[str], list[datetime], np.ndarray]:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "date":
            raise ValueError(f"{path}: first column must be 'date', got {header[:1]}")
        names = [h.strip() for h in header[1:]]
        if not names:
            raise ValueError(f"{path}: no value columns")
        stamps: list[datetime] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names) + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {len(names) + 1} fields, got {len(row)}"
                )
            stamps.append(parse_timestamp(row[0]))
            rows.append([parse_value(tok) for tok in row[1:]])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return names, stamps, np.asarray(rows, dtype=float)


def _infer_step(path, stamps: list[datetime]) -> timedelta:
    if len(stamps) == 1:
        return DAILY if stamps[0].time() == time(0, 0) else timedelta(hours=1)
    step = stamps[1] - stamps[0]
    if step <= timedelta(0):
        raise ValueError(f"{path}: timestamps must be strictly increasing")
    for i in range(1, len(stamps)):
        if stamps[i] - stamps[i - 1] != step:
            raise ValueError(
                f"{path}: irregular spacing at row {i + 2}; missing values "
                f"must be explicit NA rows, not absent rows"
            )
    return step


def read_series_csv(path) -> TimeSeries:
    names, stamps, matrix = _read_table(path)
    if len(names) != 1:
        raise ValueError(
            f"{path}: expected a single value column, got {len(names)}; "
            "use read_panel_csv for multi-station files"
        )
    step = _infer_step(path, stamps)
    return TimeSeries(start=stamps[0], step=step, values=matrix[:, 0], name=names[0])


def read_panel_csv(path) -> StationPanel:
    names, stamps, matrix = _read_table(path)
    step = _infer_step(path, stamps)
    series = tuple(
        TimeSeries(start=stamps[0], step=step, values=matrix[:, j], name=name)
        for j, name in enumerate(names)
    )
    return StationPanel(series=series, station_ids=tuple(names))


def write_json(path, payload) -> None:
    """Canonical JSON: sorted keys, two-space indent, LF, trailing newline."""
    with _open_write(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def jsonable_floats(obj):
    """Recursively convert numpy scalars/arrays to plain Python types."""
    if isinstance(obj, dict):
        return {k: jsonable_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable_floats(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj

"""Reading and writing forecast panels as long CSV files.

The default layout is one row per (date, station, lead time)::

    date,station_id,lead_time,obs,<expert_1>,...,<expert_N>

Other layouts are mapped with :class:`ColumnMapping`.
"""

from __future__ import annotations

import csv
import datetime as dt
import fnmatch
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import ForecastPanel, StreamKey

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed input file; the message names the file and line."""


class DuplicateTimestampError(ParseError):
    pass


class EmptyPanelError(ParseError):
    pass


@dataclass(frozen=True)
class ColumnMapping:
    date: str = "date"
    station: str = "station_id"
    lead_time: str = "lead_time"
    obs: str = "obs"
    experts: Optional[tuple[str, ...]] = None  # None: every remaining column

    @property
    def key_columns(self) -> tuple[str, str, str, str]:
        return (self.date, self.station, self.lead_time, self.obs)


DEFAULT_COLUMNS = ColumnMapping()


class ParsedPanels(dict):
    """``StreamKey -> ForecastPanel`` plus the number of rows dropped per stream."""

    def __init__(self, *args, dropped: Optional[dict] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.dropped: dict[StreamKey, int] = dropped or {}


def select_experts(names: Sequence[str], include: Sequence[str] = (),
                   exclude: Sequence[str] = ()) -> list[int]:
    """Indices of expert names matching any ``include`` glob (all if none) and no ``exclude`` glob."""
    keep = []
    for i, name in enumerate(names):
        if include and not any(fnmatch.fnmatchcase(name, p) for p in include):
            continue
        if any(fnmatch.fnmatchcase(name, p) for p in exclude):
            continue
        keep.append(i)
    return keep


def _number(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def parse_forecast_csv(path, columns: ColumnMapping = DEFAULT_COLUMNS,
                       include: Sequence[str] = (), exclude: Sequence[str] = (),
                       stations: Optional[Iterable[str]] = None,
                       lead_times: Optional[Iterable[int]] = None) -> ParsedPanels:
    """Group a long CSV into one panel per (station, lead time).

    Rows with a missing or non-numeric observation or expert value are dropped
    from their stream and counted. A repeated (station, lead time, date) is an error.
    """
    path = Path(path)
    station_set = set(stations) if stations is not None else None
    lead_set = {int(v) for v in lead_times} if lead_times is not None else None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        missing = [c for c in columns.key_columns if c not in header]
        if missing:
            raise ParseError(f"{path}:1: header lacks column(s) {missing}")
        if len(set(header)) != len(header):
            raise ParseError(f"{path}:1: duplicate column names in header")
        pos = {name: i for i, name in enumerate(header)}
        if columns.experts is None:
            expert_names = [h for h in header if h not in columns.key_columns]
        else:
            absent = [e for e in columns.experts if e not in pos]
            if absent:
                raise ParseError(f"{path}:1: expert column(s) {absent} not in header")
            expert_names = list(columns.experts)
        expert_names = [expert_names[i] for i in select_experts(expert_names, include, exclude)]
        if not expert_names:
            raise ParseError(f"{path}:1: no expert columns left after selection")
        expert_pos = [pos[e] for e in expert_names]

        rows: dict[StreamKey, dict[dt.date, tuple]] = {}
        dropped: dict[StreamKey, int] = {}
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(record)}")
            station = record[pos[columns.station]].strip()
            try:
                lead = int(float(record[pos[columns.lead_time]]))
                key = StreamKey(station, lead)
                date = dt.date.fromisoformat(record[pos[columns.date]].strip()[:10])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad key fields ({exc})") from None
            if station_set is not None and station not in station_set:
                continue
            if lead_set is not None and lead not in lead_set:
                continue
            stream = rows.setdefault(key, {})
            if date in stream:
                raise DuplicateTimestampError(f"{path}:{lineno}: duplicate date {date} for stream {key}")
            try:
                obs = _number(record[pos[columns.obs]])
                values = tuple(_number(record[i]) for i in expert_pos)
            except ValueError:
                stream[date] = None
                dropped[key] = dropped.get(key, 0) + 1
                continue
            stream[date] = (obs, values)

    panels = ParsedPanels(dropped=dropped)
    for key in sorted(rows):
        good = sorted((d, v) for d, v in rows[key].items() if v is not None)
        if dropped.get(key):
            log.warning("stream %s: dropped %d incomplete row(s)", key, dropped[key])
        if not good:
            raise EmptyPanelError(f"{path}: stream {key} has no complete rows")
        dates = tuple(d for d, _ in good)
        y = np.array([v[0] for _, v in good])
        X = np.array([v[1] for _, v in good]).reshape(len(good), len(expert_names))
        panels[key] = ForecastPanel(tuple(expert_names), dates, X, y, key)
    return panels


def write_forecast_csv(panels: Mapping[StreamKey, ForecastPanel], path) -> None:
    """Inverse of :func:`parse_forecast_csv` for the default layout."""
    panels = dict(panels)
    if not panels:
        raise ValueError("nothing to write")
    names = next(iter(panels.values())).expert_names
    if any(p.expert_names != names for p in panels.values()):
        raise ValueError("all panels must share the same experts")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "station_id", "lead_time", "obs", *names])
        for key in sorted(panels):
            p = panels[key]
            for t, date in enumerate(p.dates):
                writer.writerow([date.isoformat(), key.station_id, key.lead_time, repr(float(p.y[t])),
                                 *(repr(float(v)) for v in p.X[t])])

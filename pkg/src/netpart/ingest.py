"""Speed-record parsing and per-road daily series assembly."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass

import numpy as np

from .errors import AllMissing, DuplicatePeriod, MalformedRow, PeriodOutOfRange

SLOTS_PER_DAY = 288  # 5-minute intervals
HEADER = ("date", "period", "road_id", "speed", "sample_vehicles")


@dataclass(frozen=True)
class SpeedRecord:
    date: dt.date
    period: int
    road_id: str
    speed: float
    sample_vehicles: int


@dataclass(frozen=True, eq=False)
class DailySeries:
    road_id: str
    date: dt.date
    values: np.ndarray
    imputed_mask: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.imputed_mask.shape or self.values.ndim != 1:
            raise ValueError("values and imputed_mask must be 1-d and equally long")
        if self.imputed_mask.all():
            raise AllMissing(f"road {self.road_id} on {self.date}: every slot imputed")


def parse_date(text):
    return dt.datetime.strptime(text.strip(), "%Y%m%d").date()


def format_date(date):
    return date.strftime("%Y%m%d")


def parse_records(stream, period_base=0, slots=SLOTS_PER_DAY):
    """Parse the records CSV into a list of :class:`SpeedRecord`.

    ``stream`` is a text file object or a string.  With ``period_base=1`` the
    file's periods are read as 1..slots and shifted to 0-based.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    records = []
    reader = csv.reader(stream)
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1 and row and row[0].strip().lower() == "date":
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise MalformedRow(lineno, f"expected {len(HEADER)} columns, got {len(row)}")
        try:
            date = parse_date(row[0])
            period = int(row[1]) - period_base
            road = row[2].strip()
            speed = float(row[3])
            vehicles = int(row[4])
        except ValueError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        if not 0 <= period < slots:
            raise PeriodOutOfRange(lineno, period + period_base, slots)
        if not np.isfinite(speed) or speed < 0:
            raise MalformedRow(lineno, f"speed must be finite and non-negative, got {row[3]}")
        if vehicles < 0:
            raise MalformedRow(lineno, f"sample_vehicles must be non-negative, got {vehicles}")
        if not road:
            raise MalformedRow(lineno, "empty road_id")
        records.append(SpeedRecord(date, period, road, speed, vehicles))
    return records


def write_records(records, stream, period_base=0):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow(
            [format_date(r.date), r.period + period_base, r.road_id, repr(float(r.speed)), r.sample_vehicles]
        )


def impute_missing(values):
    """Fill NaN gaps: linear inside, nearest observed value at the ends."""
    values = np.asarray(values, dtype=np.float64)
    observed = ~np.isnan(values)
    if not observed.any():
        raise AllMissing("no observed values to impute from")
    idx = np.arange(len(values))
    out = values.copy()
    # np.interp clamps to the end points outside the observed range
    out[~observed] = np.interp(idx[~observed], idx[observed], values[observed])
    return out


def assemble_series(records, road_id, date, slots=SLOTS_PER_DAY):
    """Build the gap-filled :class:`DailySeries` for one road and day."""
    values = np.full(slots, np.nan)
    for r in records:
        if r.road_id != road_id or r.date != date:
            continue
        if not np.isnan(values[r.period]):
            raise DuplicatePeriod(f"road {road_id} on {date}: period {r.period} appears twice")
        values[r.period] = r.speed
    mask = np.isnan(values)
    if mask.all():
        raise AllMissing(f"road {road_id} has no observations on {date}")
    return DailySeries(road_id, date, impute_missing(values), mask)


def assemble_all(records, slots=SLOTS_PER_DAY):
    """Group records once and assemble every (road, date) series.

    Returns ``{date: {road_id: DailySeries}}`` with dates and roads in first
    appearance order.
    """
    grouped = {}
    for r in records:
        grouped.setdefault(r.date, {}).setdefault(r.road_id, []).append(r)
    return {
        date: {road: assemble_series(recs, road, date, slots) for road, recs in roads.items()}
        for date, roads in grouped.items()
    }

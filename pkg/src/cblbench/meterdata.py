"""Load-data model, calendar helpers and interval CSV ingestion.

Readings are stored as a dense ``(customers, days, slots)`` float array in
kWh per slot.  Cells without data are NaN; :func:`validate` reports them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DuplicateError, MembershipError, ParseError, ShapeError


def is_weekend(day: date) -> bool:
    return day.weekday() >= 5


def date_range(start: date, end: date) -> tuple[date, ...]:
    """Inclusive range of calendar dates."""
    n = (end - start).days + 1
    return tuple(start + timedelta(days=k) for k in range(max(n, 0)))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LoadDataset:
    """Per-customer consumption, indexed ``readings[customer, day, slot]``."""

    customers: tuple[str, ...]
    days: tuple[date, ...]
    readings: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "customers", tuple(str(c) for c in self.customers))
        object.__setattr__(self, "days", tuple(self.days))
        object.__setattr__(self, "readings", _frozen(self.readings))
        if self.readings.ndim != 3:
            raise ShapeError("readings must be 3-D (customers, days, slots)")
        n_c, n_d, n_s = self.readings.shape
        if n_c != len(self.customers) or n_d != len(self.days):
            raise ShapeError(
                f"readings shape {self.readings.shape} does not match "
                f"{len(self.customers)} customers x {len(self.days)} days"
            )
        if n_s < 1:
            raise ShapeError("slots_per_day must be positive")
        if len(set(self.customers)) != n_c:
            raise ShapeError("customer ids must be unique")
        if any(b <= a for a, b in zip(self.days, self.days[1:])):
            raise ShapeError("days must be strictly increasing")

    @property
    def slots_per_day(self) -> int:
        return self.readings.shape[2]

    def customer_index(self, customer: str) -> int:
        try:
            return self._cidx[customer]
        except KeyError:
            raise MembershipError(f"unknown customer id {customer!r}") from None

    def customer_indices(self, who: Iterable[str]) -> np.ndarray:
        return np.array([self.customer_index(c) for c in who], dtype=np.intp)

    def day_index(self, day: date) -> int:
        try:
            return self._didx[day]
        except KeyError:
            raise MembershipError(f"day {day} not in dataset") from None

    @property
    def _cidx(self) -> dict:
        # cached lazily; the dataclass is frozen so bypass __setattr__
        cache = self.__dict__.get("_cidx_cache")
        if cache is None:
            cache = {c: k for k, c in enumerate(self.customers)}
            object.__setattr__(self, "_cidx_cache", cache)
        return cache

    @property
    def _didx(self) -> dict:
        cache = self.__dict__.get("_didx_cache")
        if cache is None:
            cache = {d: k for k, d in enumerate(self.days)}
            object.__setattr__(self, "_didx_cache", cache)
        return cache

    def series(self, customer: str) -> "LoadSeries":
        k = self.customer_index(customer)
        return LoadSeries(days=self.days, readings=self.readings[k], label=customer)

    def subset(self, who: Sequence[str]) -> "LoadDataset":
        idx = self.customer_indices(who)
        return LoadDataset(tuple(who), self.days, self.readings[idx])


@dataclass(frozen=True, eq=False)
class LoadSeries:
    """A single consumption series ``readings[day, slot]``, e.g. an aggregate."""

    days: tuple[date, ...]
    readings: np.ndarray
    label: str = ""
    members: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "days", tuple(self.days))
        object.__setattr__(self, "readings", _frozen(self.readings))
        object.__setattr__(self, "members", tuple(self.members))
        if self.readings.ndim != 2 or self.readings.shape[0] != len(self.days):
            raise ShapeError("series readings must be (days, slots)")

    @property
    def slots_per_day(self) -> int:
        return self.readings.shape[1]

    def day_index(self, day: date) -> int:
        try:
            return self.days.index(day)
        except ValueError:
            raise MembershipError(f"day {day} not in series") from None


@dataclass(frozen=True)
class EventSchedule:
    event_days: tuple[date, ...]
    event_window: tuple[int, int] = (15, 21)
    holidays: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "event_days", tuple(sorted(set(self.event_days))))
        object.__setattr__(self, "holidays", frozenset(self.holidays))
        start, end = self.event_window
        object.__setattr__(self, "event_window", (int(start), int(end)))
        if not 0 <= start < end:
            raise ValueError(f"invalid event window {self.event_window}")
        clash = self.holidays.intersection(self.event_days)
        if clash:
            raise ValueError(f"event days overlap holidays: {sorted(clash)}")

    def check_against(self, d: LoadDataset | LoadSeries) -> None:
        """Raise if the schedule does not fit the dataset's calendar or slots."""
        if self.event_window[1] > d.slots_per_day:
            raise ValueError(
                f"event window {self.event_window} exceeds {d.slots_per_day} slots"
            )
        known = set(d.days)
        missing = [day for day in self.event_days if day not in known]
        if missing:
            raise MembershipError(f"event days not in dataset: {missing}")

    @property
    def window_slots(self) -> range:
        return range(*self.event_window)


@dataclass(frozen=True)
class ValidationReport:
    missing_cells: list = field(default_factory=list)
    negative_cells: list = field(default_factory=list)
    gap_days: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing_cells or self.negative_cells or self.gap_days)

    def summary(self) -> str:
        if self.ok:
            return "ok"
        return (
            f"{len(self.missing_cells)} missing cells, "
            f"{len(self.negative_cells)} negative cells, "
            f"{len(self.gap_days)} gap days"
        )


def validate(d: LoadDataset) -> ValidationReport:
    r = d.readings
    missing = np.argwhere(~np.isfinite(r))
    negative = np.argwhere(r < 0)

    def cells(idx):
        return [(d.customers[i], d.days[j], int(t)) for i, j, t in idx]

    gaps = []
    if d.days:
        present = set(d.days)
        gaps = [day for day in date_range(d.days[0], d.days[-1]) if day not in present]
        empty = np.all(~np.isfinite(r), axis=(0, 2)) if r.size else []
        gaps.extend(day for day, e in zip(d.days, empty) if e)
        gaps = sorted(set(gaps))
    return ValidationReport(cells(missing), cells(negative), gaps)


def resample_to_hourly(d: LoadDataset) -> LoadDataset:
    n = d.slots_per_day
    if n % 24:
        raise ShapeError(f"slots_per_day={n} is not a multiple of 24")
    k = n // 24
    if k == 1:
        return d
    r = d.readings.reshape(len(d.customers), len(d.days), 24, k).sum(axis=3)
    return LoadDataset(d.customers, d.days, r)


def aggregate(d: LoadDataset, who: Iterable[str]) -> LoadSeries:
    """Sum the series of the customers in ``who`` (kept in dataset order)."""
    who = set(who)
    if not who:
        raise ValueError("cannot aggregate an empty customer set")
    unknown = who.difference(d.customers)
    if unknown:
        raise MembershipError(f"unknown customer ids: {sorted(unknown)}")
    members = tuple(c for c in d.customers if c in who)
    idx = d.customer_indices(members)
    return LoadSeries(d.days, d.readings[idx].sum(axis=0), label="aggregate", members=members)


@dataclass(frozen=True)
class IntervalLayout:
    """Column layout of a wide interval CSV (one row per customer-day).

    ``value_columns`` left as None means every header column after the id
    and date columns, in order.
    """

    customer_column: str = "customer_id"
    date_column: str = "date"
    value_columns: tuple[str, ...] | None = None
    allowed_slots: tuple[int, ...] = (24, 48)


def _text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8-sig"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def parse_interval_csv(source, layout: IntervalLayout | None = None) -> LoadDataset:
    """Read a wide interval CSV from a byte stream (or bytes / text stream).

    Customers are sorted by id and days span the min..max date present, so
    row order never affects the result.  Customer-days with no row are NaN.
    """
    layout = layout or IntervalLayout()
    reader = csv.reader(_text(source))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", row=1) from None
    header = [h.strip() for h in header]
    try:
        c_col = header.index(layout.customer_column)
        d_col = header.index(layout.date_column)
    except ValueError:
        raise ParseError(
            f"header must contain {layout.customer_column!r} and {layout.date_column!r}",
            row=1,
        ) from None
    if layout.value_columns is None:
        v_cols = [k for k in range(len(header)) if k not in (c_col, d_col)]
    else:
        try:
            v_cols = [header.index(name) for name in layout.value_columns]
        except ValueError as exc:
            raise ParseError(f"missing value column: {exc}", row=1) from None
    n_slots = len(v_cols)
    if n_slots not in layout.allowed_slots:
        raise ParseError(
            f"{n_slots} interval columns; expected one of {layout.allowed_slots}", row=1
        )

    rows: dict[tuple[str, date], tuple[int, list[float]]] = {}
    for line_no, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and not rec[0].strip()):
            continue
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(rec)}", row=line_no)
        cust = rec[c_col].strip()
        if not cust:
            raise ParseError("empty customer id", row=line_no)
        try:
            day = date.fromisoformat(rec[d_col].strip())
        except ValueError:
            raise ParseError(f"unparsable date {rec[d_col]!r}", row=line_no) from None
        values = []
        for k in v_cols:
            try:
                v = float(rec[k])
            except ValueError:
                raise ParseError(f"unparsable number {rec[k]!r}", row=line_no) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {rec[k]!r}", row=line_no)
            values.append(v)
        key = (cust, day)
        if key in rows:
            first = rows[key][0]
            raise DuplicateError(
                f"duplicate customer/date {cust},{day} (first seen on row {first})",
                row=line_no,
            )
        rows[key] = (line_no, values)

    if not rows:
        raise ParseError("no data rows", row=2)
    customers = tuple(sorted({c for c, _ in rows}))
    all_days = [d for _, d in rows]
    days = date_range(min(all_days), max(all_days))
    c_idx = {c: k for k, c in enumerate(customers)}
    start = days[0]
    readings = np.full((len(customers), len(days), n_slots), np.nan)
    for (cust, day), (_, values) in rows.items():
        readings[c_idx[cust], (day - start).days] = values
    return LoadDataset(customers, days, readings)


def read_interval_csv(path, layout: IntervalLayout | None = None) -> LoadDataset:
    with open(path, "rb") as fh:
        return parse_interval_csv(fh, layout)


def value_header(n_slots: int) -> list[str]:
    return [f"v{k:02d}" for k in range(n_slots)]


def write_interval_csv(d: LoadDataset, sink: IO[str]) -> None:
    """Serialize in the same wide layout ``parse_interval_csv`` reads.

    Customer-days that are entirely missing are omitted; partially missing
    rows cannot be represented and raise.
    """
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["customer_id", "date", *value_header(d.slots_per_day)])
    for i, cust in enumerate(d.customers):
        for j, day in enumerate(d.days):
            row = d.readings[i, j]
            finite = np.isfinite(row)
            if not finite.any():
                continue
            if not finite.all():
                raise ValueError(f"partially missing row for {cust} on {day}")
            w.writerow([cust, day.isoformat(), *(repr(float(v)) for v in row)])


def save_interval_csv(d: LoadDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_interval_csv(d, fh)

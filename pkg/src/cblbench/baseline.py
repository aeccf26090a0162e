"""Customer baseline load (CBL) calculation: HighXofY and RCT."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import InsufficientHistoryError, MembershipError, ParseError
from .meterdata import EventSchedule, LoadDataset, LoadSeries, is_weekend

AGGREGATE = "__aggregate__"


@dataclass(frozen=True)
class HighXofYConfig:
    x: int = 5
    y: int = 10
    include_weekends: bool = True
    exclude_holidays: bool = True
    exclude_prior_event_days: bool = True

    def __post_init__(self):
        if not 1 <= self.x <= self.y:
            raise ValueError(f"need 1 <= x <= y, got x={self.x}, y={self.y}")


@dataclass(frozen=True, eq=False)
class BaselineCurve:
    subject: str
    event_day: date
    values: np.ndarray
    # customers summed into an aggregate subject; empty for a single customer
    members: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def is_aggregate(self) -> bool:
        return self.subject == AGGREGATE


@dataclass(frozen=True)
class PopulationSplit:
    control: tuple[str, ...]
    treatment: tuple[str, ...]
    control_fraction: float
    seed: int

    def check_against(self, d: LoadDataset) -> None:
        if not self.control:
            raise ValueError("control group is empty")
        if set(self.control) & set(self.treatment):
            raise ValueError("control and treatment overlap")
        unknown = set(self.control).union(self.treatment).difference(d.customers)
        if unknown:
            raise MembershipError(f"split names unknown customers: {sorted(unknown)}")


# --- HighXofY ---------------------------------------------------------------


def eligible_days(
    d: LoadDataset | LoadSeries,
    s: EventSchedule,
    event_day: date,
    cfg: HighXofYConfig,
) -> list[date]:
    """The ``cfg.y`` most recent qualifying days before ``event_day``.

    Ordered most recent first.
    """
    if event_day not in s.event_days:
        raise MembershipError(f"{event_day} is not a scheduled event day")
    known = set(d.days)
    events = set(s.event_days)
    first = d.days[0]
    out = []
    day = event_day - timedelta(days=1)
    while len(out) < cfg.y and day >= first:
        skip = (
            day not in known
            or (cfg.exclude_prior_event_days and day in events)
            or (cfg.exclude_holidays and day in s.holidays)
            or (not cfg.include_weekends and is_weekend(day))
        )
        if not skip:
            out.append(day)
        day -= timedelta(days=1)
    if len(out) < cfg.y:
        raise InsufficientHistoryError(
            f"only {len(out)} qualifying days before {event_day}, need {cfg.y}"
        )
    return out


def select_high_days(history: np.ndarray, x: int) -> np.ndarray:
    """Indices of the ``x`` days with the largest daily mean.

    ``history`` is ``(..., y, slots)`` with days ordered most recent first;
    ties go to the more recent day.  Returns ``(..., x)`` indices into the
    day axis, highest mean first.
    """
    means = history.mean(axis=-1)
    order = np.argsort(-means, axis=-1, kind="stable")
    return order[..., :x]


def _high_x_of_y_array(history: np.ndarray, x: int) -> np.ndarray:
    idx = select_high_days(history, x)
    picked = np.take_along_axis(history, idx[..., None], axis=-2)
    return picked.mean(axis=-2)


def high_x_of_y(d, s: EventSchedule, event_day: date, cfg: HighXofYConfig):
    """HighXofY baseline for ``event_day``.

    A :class:`LoadSeries` gives a single curve.  A :class:`LoadDataset`
    gives one curve per customer, each from that customer's own highest
    days, in dataset order.
    """
    days = eligible_days(d, s, event_day, cfg)
    if isinstance(d, LoadSeries):
        idx = [d.day_index(day) for day in days]
        values = _high_x_of_y_array(d.readings[idx], cfg.x)
        subject = AGGREGATE if d.members else (d.label or AGGREGATE)
        return BaselineCurve(subject, event_day, values, d.members)
    idx = [d.day_index(day) for day in days]
    values = _high_x_of_y_array(d.readings[:, idx, :], cfg.x)
    return [BaselineCurve(c, event_day, v) for c, v in zip(d.customers, values)]


def high_x_of_y_matrix(readings: np.ndarray, day_idx: Sequence[int], x: int) -> np.ndarray:
    """Vectorised core: ``readings`` is ``(subjects, days, slots)``."""
    return _high_x_of_y_array(readings[:, list(day_idx), :], x)


# --- RCT ----------------------------------------------------------------------


def control_size(n: int, control_fraction: float) -> int:
    # half-up rounding so 199 * 0.05 = 9.95 gives 10
    return max(1, int(math.floor(control_fraction * n + 0.5)))


def rct_split(customers: Sequence[str], control_fraction: float, seed: int) -> PopulationSplit:
    customers = tuple(customers)
    if len(set(customers)) != len(customers):
        raise ValueError("customer ids must be unique")
    if not 0 < control_fraction < 1:
        raise ValueError(f"control_fraction must be in (0, 1), got {control_fraction}")
    n = len(customers)
    k = control_size(n, control_fraction)
    if k >= n:
        raise ValueError(f"{n} customers leave no treatment group at fraction {control_fraction}")
    rng = np.random.default_rng(seed)
    chosen = np.zeros(n, dtype=bool)
    chosen[rng.permutation(n)[:k]] = True
    control = tuple(c for c, m in zip(customers, chosen) if m)
    treatment = tuple(c for c, m in zip(customers, chosen) if not m)
    return PopulationSplit(control, treatment, control_fraction, seed)


def _control_sum(d: LoadDataset, split: PopulationSplit, event_day: date) -> np.ndarray:
    split.check_against(d)
    j = d.day_index(event_day)
    idx = d.customer_indices(split.control)
    return d.readings[idx, j, :].sum(axis=0)


def rct_baseline_granular(d: LoadDataset, split: PopulationSplit, event_day: date) -> list[BaselineCurve]:
    """Control-group mean curve, assigned to every treatment customer."""
    mean = _control_sum(d, split, event_day) / len(split.control)
    return [BaselineCurve(c, event_day, mean) for c in split.treatment]


def rct_baseline_aggregated(d: LoadDataset, split: PopulationSplit, event_day: date) -> BaselineCurve:
    """Control aggregate scaled up to the treatment population size."""
    total = _control_sum(d, split, event_day)
    values = total * (len(split.treatment) / len(split.control))
    return BaselineCurve(AGGREGATE, event_day, values, split.treatment)


# --- CSV ----------------------------------------------------------------------

BASELINE_COLUMNS = ("subject", "event_day", "slot", "cbl_kwh")


def write_baseline_csv(curves: Iterable[BaselineCurve], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(BASELINE_COLUMNS)
    for c in curves:
        for t, v in enumerate(c.values):
            w.writerow([c.subject, c.event_day.isoformat(), t, repr(float(v))])


def read_baseline_csv(source: IO[str]) -> list[BaselineCurve]:
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != BASELINE_COLUMNS:
        raise ParseError(f"expected header {','.join(BASELINE_COLUMNS)}", row=1)
    curves: dict[tuple[str, date], dict[int, float]] = {}
    for line_no, rec in enumerate(reader, start=2):
        if not rec:
            continue
        try:
            subject, day, slot, value = rec
            key = (subject, date.fromisoformat(day))
            slot, value = int(slot), float(value)
        except ValueError as exc:
            raise ParseError(str(exc), row=line_no) from None
        slots = curves.setdefault(key, {})
        if slot in slots:
            raise ParseError(f"duplicate slot {slot} for {subject} {day}", row=line_no)
        slots[slot] = value
    out = []
    for (subject, day), slots in curves.items():
        if sorted(slots) != list(range(len(slots))):
            raise ParseError(f"non-contiguous slots for {subject} {day}")
        out.append(BaselineCurve(subject, day, [slots[t] for t in range(len(slots))]))
    return out

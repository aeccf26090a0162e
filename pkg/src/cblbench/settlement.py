"""Peak Time Rebate settlement against a baseline.

Only the part of the baseline above actual load during event hours is paid
(one-sided); with no real demand response in the data every paid kWh is a
false load reduction.  Money is held as integer micro-dollars.  Percentages
are computed from unrounded energy so that rebate% / FLR% equals the
incentive/retail rate ratio exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from decimal import Decimal
from typing import Mapping, Sequence

import numpy as np

from .baseline import AGGREGATE, BaselineCurve
from .errors import CoverageError, DataError
from .meterdata import EventSchedule, LoadDataset, aggregate
from .metrics import confidence_interval

MICRO = 1_000_000


def to_micro(dollars: float) -> int:
    return int(round(dollars * MICRO))


def micro_to_decimal(micro: int) -> Decimal:
    return Decimal(int(micro)).scaleb(-6)


@dataclass(frozen=True)
class TariffSchedule:
    incentive_rate: float = 0.35  # $/kWh paid for reduction below baseline
    retail_rate: float = 0.097  # $/kWh fixed tariff

    def __post_init__(self):
        if not (self.incentive_rate > 0 and self.retail_rate > 0):
            raise ValueError("tariff rates must be positive")

    @property
    def ratio(self) -> float:
        return self.incentive_rate / self.retail_rate


@dataclass(frozen=True)
class SettlementRecord:
    subject: str
    event_day: date
    flr_kwh: float
    consumption_kwh: float
    rebate_micro: int
    revenue_micro: int
    flr_pct: float
    rebate_pct: float

    @property
    def rebate(self) -> Decimal:
        return micro_to_decimal(self.rebate_micro)

    @property
    def revenue(self) -> Decimal:
        return micro_to_decimal(self.revenue_micro)


def _record(subject, event_day, flr, cons, rebate_micro, revenue_micro, tariff):
    flr_pct = 100.0 * flr / cons if cons > 0 else 0.0
    rebate_pct = (
        100.0 * (tariff.incentive_rate * flr) / (tariff.retail_rate * cons) if cons > 0 else 0.0
    )
    return SettlementRecord(
        subject, event_day, flr, cons, rebate_micro, revenue_micro, flr_pct, rebate_pct
    )


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, BaselineCurve) else x, dtype=np.float64)


def ptr_settle(
    baseline,
    actual,
    window: tuple[int, int] | range,
    tariff: TariffSchedule = TariffSchedule(),
    subject: str | None = None,
    event_day: date | None = None,
) -> SettlementRecord:
    """Settle one subject on one event day."""
    b, l = _values(baseline), _values(actual)
    if b.shape != l.shape or b.ndim != 1:
        raise CoverageError(f"baseline {b.shape} and actual {l.shape} must be equal 1-D days")
    if not (np.isfinite(b).all() and np.isfinite(l).all()):
        raise DataError("non-finite value in baseline or actual load")
    if (l < 0).any() or (b < 0).any():
        raise DataError("negative reading")
    w = range(*window) if isinstance(window, tuple) else window
    if not len(w) or w[0] < 0 or w[-1] >= b.size:
        raise ValueError(f"window {window} outside the {b.size}-slot day")
    flr = math.fsum(max(0.0, float(b[t] - l[t])) for t in w)
    cons = math.fsum(map(float, l))
    if isinstance(baseline, BaselineCurve):
        subject = subject or baseline.subject
        event_day = event_day or baseline.event_day
    return _record(
        subject or "",
        event_day,
        flr,
        cons,
        to_micro(tariff.incentive_rate * flr),
        to_micro(tariff.retail_rate * cons),
        tariff,
    )


def settle_matrix(
    baselines: np.ndarray,
    actuals: np.ndarray,
    window: tuple[int, int],
    tariff: TariffSchedule,
    event_day: date | None = None,
    subject: str = "population",
) -> SettlementRecord:
    """Population record from per-subject ``(subjects, slots)`` arrays.

    Equals summing :func:`ptr_settle` over the subjects: energies with
    compensated sums, money as the sum of per-subject micro-dollar amounts.
    """
    b = np.asarray(baselines, dtype=np.float64)
    l = np.asarray(actuals, dtype=np.float64)
    if b.shape != l.shape or b.ndim != 2:
        raise CoverageError("baselines and actuals must both be (subjects, slots)")
    if (l < 0).any() or (b < 0).any():
        raise DataError("negative reading")
    lo, hi = window
    flr_i = np.maximum(0.0, b[:, lo:hi] - l[:, lo:hi])
    flr_each = [math.fsum(row) for row in flr_i.tolist()]
    cons_each = [math.fsum(row) for row in l.tolist()]
    rebate = sum(to_micro(tariff.incentive_rate * f) for f in flr_each)
    revenue = sum(to_micro(tariff.retail_rate * c) for c in cons_each)
    return _record(
        subject, event_day, math.fsum(flr_each), math.fsum(cons_each), rebate, revenue, tariff
    )


@dataclass(frozen=True)
class SettlementReport:
    mode: str
    per_day: tuple[SettlementRecord, ...]
    flr_pct_mean: float
    rebate_pct_mean: float
    flr_pct_ci: tuple[float, float] | None
    rebate_pct_ci: tuple[float, float] | None

    @property
    def rebate_micro(self) -> int:
        return sum(r.rebate_micro for r in self.per_day)


def summarize(mode: str, per_day: Sequence[SettlementRecord], level: float = 0.95) -> SettlementReport:
    flr = [r.flr_pct for r in per_day]
    reb = [r.rebate_pct for r in per_day]
    many = len(per_day) >= 2
    return SettlementReport(
        mode=mode,
        per_day=tuple(per_day),
        flr_pct_mean=float(np.mean(flr)),
        rebate_pct_mean=float(np.mean(reb)),
        flr_pct_ci=confidence_interval(flr, level) if many else None,
        rebate_pct_ci=confidence_interval(reb, level) if many else None,
    )


def settle_population(
    baselines: Mapping[date, Sequence[BaselineCurve] | BaselineCurve],
    dataset: LoadDataset,
    schedule: EventSchedule,
    tariff: TariffSchedule = TariffSchedule(),
    mode: str = "granular",
) -> SettlementReport:
    """Settle every event day of ``schedule``.

    Granular mode expects a sequence of per-customer curves per day and
    sums their records; aggregated mode expects one aggregate curve whose
    ``members`` define the settled population.
    """
    if mode not in ("granular", "aggregated"):
        raise ValueError(f"unknown mode {mode!r}")
    records = []
    for day in schedule.event_days:
        if day not in baselines:
            raise CoverageError(f"no baseline for event day {day}")
        j = dataset.day_index(day)
        entry = baselines[day]
        if mode == "aggregated":
            if not isinstance(entry, BaselineCurve) or not entry.members:
                raise CoverageError("aggregated settlement needs one aggregate curve with members")
            actual = aggregate(dataset, entry.members).readings[j]
            records.append(ptr_settle(entry, actual, schedule.event_window, tariff, AGGREGATE, day))
        else:
            curves = list(entry)
            if not curves:
                raise CoverageError(f"no customer baselines for {day}")
            idx = dataset.customer_indices([c.subject for c in curves])
            b = np.stack([c.values for c in curves])
            records.append(
                settle_matrix(b, dataset.readings[idx, j, :], schedule.event_window, tariff, day)
            )
    return summarize(mode, records)

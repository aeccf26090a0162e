"""Seeded synthetic residential load data.

Each reading is ``scale[customer] * season[day] * weather[day] *
profile[hour] * noise[customer, day, hour]``, then the whole array is
rescaled so the population mean equals ``target_per_capita`` kWh/hour.
Customers are i.i.d. draws; the only shared variation is the calendar
(season and daily weather), which is what makes aggregates predictable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from datetime import date

import numpy as np

from .errors import ConfigError, CoverageError
from .meterdata import EventSchedule, LoadDataset, date_range

# Relative hourly weights: low overnight, a morning bump and a larger
# evening peak around 18:00-20:00.
DEFAULT_PROFILE = (
    0.55, 0.45, 0.40, 0.38, 0.38, 0.42, 0.60, 0.85,
    0.90, 0.75, 0.65, 0.62, 0.60, 0.58, 0.60, 0.70,
    0.90, 1.20, 1.45, 1.50, 1.35, 1.10, 0.85, 0.68,
)


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 199
    year: int = 2012
    base_profile: tuple[float, ...] = DEFAULT_PROFILE
    seasonal_amplitude: float = 0.15
    customer_scale_dispersion: float = 0.55
    noise_cv: float = 0.45
    daily_weather_cv: float = 0.05
    target_per_capita: float = 1.9
    seed: int = 0
    # day of year (0-based) where the twice-yearly seasonal cycle peaks;
    # 15 puts the humps in mid-January and mid-July
    seasonal_peak_day: int = 15

    def __post_init__(self):
        object.__setattr__(self, "base_profile", tuple(float(w) for w in self.base_profile))
        self.check()

    def check(self) -> None:
        if self.n_customers < 2:
            raise ConfigError("n_customers must be >= 2")
        if len(self.base_profile) != 24:
            raise ConfigError("base_profile needs 24 hourly weights")
        if any(w < 0 for w in self.base_profile) or sum(self.base_profile) <= 0:
            raise ConfigError("base_profile weights must be >= 0 with a positive sum")
        if self.noise_cv < 0 or self.daily_weather_cv < 0:
            raise ConfigError("noise coefficients of variation must be >= 0")
        if self.customer_scale_dispersion < 0:
            raise ConfigError("customer_scale_dispersion must be >= 0")
        if not 0 <= self.seasonal_amplitude < 1:
            raise ConfigError("seasonal_amplitude must be in [0, 1)")
        if not self.target_per_capita > 0:
            raise ConfigError("target_per_capita must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base_profile"] = list(self.base_profile)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown synthetic config keys: {sorted(extra)}")
        return cls(**d)


def _unit_gamma(rng, cv, size):
    """Mean-one gamma draws with the given coefficient of variation."""
    if cv == 0:
        return np.ones(size)
    k = 1.0 / cv**2
    return rng.gamma(k, 1.0 / k, size)


def seasonal_factor(n_days: int, amplitude: float, peak_day: int = 15) -> np.ndarray:
    k = np.arange(n_days)
    return 1.0 + amplitude * np.cos(4.0 * np.pi * (k - peak_day) / n_days)


def generate(cfg: SynthConfig) -> LoadDataset:
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    days = date_range(date(cfg.year, 1, 1), date(cfg.year, 12, 31))
    n_c, n_d = cfg.n_customers, len(days)

    s = cfg.customer_scale_dispersion
    if s > 0:
        scale = rng.lognormal(-0.5 * s * s, s, n_c)
    else:
        scale = np.ones(n_c)
    weather = _unit_gamma(rng, cfg.daily_weather_cv, n_d)
    noise = _unit_gamma(rng, cfg.noise_cv, (n_c, n_d, 24))

    day_factor = seasonal_factor(n_d, cfg.seasonal_amplitude, cfg.seasonal_peak_day) * weather
    profile = np.asarray(cfg.base_profile)
    raw = scale[:, None, None] * day_factor[None, :, None] * profile[None, None, :] * noise
    readings = raw * (cfg.target_per_capita / raw.mean())
    customers = tuple(f"C{k:03d}" for k in range(n_c))
    return LoadDataset(customers, days, readings)


def default_event_schedule(
    d: LoadDataset,
    window: tuple[int, int] = (15, 21),
    min_history: int = 14,
    holidays=(),
) -> EventSchedule:
    """One event day per calendar month: the day with the highest total load.

    Days with fewer than ``min_history`` days of data before them are not
    candidates, so the first month still leaves room for a HighXofY lookback.
    Ties go to the earliest date.
    """
    months = {}
    for k, day in enumerate(d.days):
        months.setdefault((day.year, day.month), []).append(k)
    if len({m for _, m in months}) < 12:
        raise CoverageError(f"dataset covers {len(months)} months, need 12")
    holidays = frozenset(holidays)
    totals = np.nansum(d.readings, axis=(0, 2))
    chosen = []
    for key in sorted(months):
        cand = [k for k in months[key] if k >= min_history and d.days[k] not in holidays]
        if not cand:
            continue
        # argmax returns the first maximum, i.e. the earliest date
        chosen.append(d.days[cand[int(np.argmax(totals[cand]))]])
    if len({(c.year, c.month) for c in chosen}) < 12:
        raise CoverageError("could not place an event day in 12 distinct months")
    return EventSchedule(tuple(chosen), window, holidays)

"""Baseline error metrics: MAE (accuracy), bias and the overall performance index.

Baselines and actuals are arrays shaped ``(subjects, days, slots)``; 1-D and
2-D inputs are read as a single subject (and a single day).  An
:class:`EvalWindow` picks the cells that count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import CoverageError

DEFAULT_LAMBDA = 0.5


@dataclass(frozen=True)
class EvalWindow:
    """Index selection over the (subjects, days, slots) axes; None keeps all."""

    subjects: Sequence[int] | None = None
    days: Sequence[int] | None = None
    slots: Sequence[int] | None = None

    def __post_init__(self):
        for name in ("subjects", "days", "slots"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(int(k) for k in v)
                if not v:
                    raise ValueError(f"EvalWindow.{name} must not be empty")
                object.__setattr__(self, name, v)

    def select(self, a: np.ndarray) -> np.ndarray:
        if self.subjects is not None:
            a = a[list(self.subjects)]
        if self.days is not None:
            a = a[:, list(self.days)]
        if self.slots is not None:
            a = a[:, :, list(self.slots)]
        return a


def _as3d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    while a.ndim < 3:
        a = a[None]
    if a.ndim != 3:
        raise ValueError("expected at most 3 dimensions (subjects, days, slots)")
    return a


def _errors(baselines, actuals, window: EvalWindow | None) -> np.ndarray:
    b, l = _as3d(baselines), _as3d(actuals)
    if b.shape != l.shape:
        raise CoverageError(f"baseline shape {b.shape} != actual shape {l.shape}")
    window = window or EvalWindow()
    try:
        b, l = window.select(b), window.select(l)
    except IndexError as exc:
        raise CoverageError(f"window outside data: {exc}") from None
    if b.size == 0:
        raise CoverageError("evaluation window is empty")
    if not (np.isfinite(b).all() and np.isfinite(l).all()):
        raise CoverageError("missing (non-finite) cells inside the evaluation window")
    return b - l


def mae(baselines, actuals, window: EvalWindow | None = None) -> float:
    """Mean absolute hourly deviation of baseline from actual load."""
    return float(np.mean(np.abs(_errors(baselines, actuals, window))))


def bias(baselines, actuals, window: EvalWindow | None = None) -> float:
    """Mean signed deviation; positive means the baseline overestimates."""
    return float(np.mean(_errors(baselines, actuals, window)))


def opi(alpha: float, beta: float, lam: float = DEFAULT_LAMBDA) -> float:
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    return lam * abs(alpha) + (1 - lam) * abs(beta)


def confidence_interval(samples, level: float = 0.95) -> tuple[float, float]:
    """Student-t interval for the mean of ``samples``."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least 2 samples for a confidence interval")
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    m = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0:
        return m, m
    half = float(stats.t.ppf((1 + level) / 2, x.size - 1)) * sd / float(np.sqrt(x.size))
    return m - half, m + half


def per_capita(value: float, treatment_count: int) -> float:
    if treatment_count < 1:
        raise ValueError("treatment_count must be >= 1")
    return value / treatment_count


@dataclass(frozen=True)
class MetricsReport:
    alpha: float
    beta: float
    opi: float
    lam: float
    per_day_alpha: tuple[float, ...]
    per_day_beta: tuple[float, ...]
    per_day_opi: tuple[float, ...]
    ci95: dict = field(default_factory=dict)


def evaluate(
    baselines,
    actuals,
    window: EvalWindow | None = None,
    lam: float = DEFAULT_LAMBDA,
    level: float = 0.95,
    normalize_by: int = 1,
) -> MetricsReport:
    """Metrics over the window plus per-day values and their t intervals.

    ``normalize_by`` divides alpha and beta, e.g. by the treatment count
    to express aggregate-level errors per capita.  The OPI interval is
    taken over per-day OPI values.
    """
    err = _errors(baselines, actuals, window) / normalize_by
    per_day_a = np.abs(err).mean(axis=(0, 2))
    per_day_b = err.mean(axis=(0, 2))
    a, b = float(np.abs(err).mean()), float(err.mean())
    per_day_o = np.array([opi(x, y, lam) for x, y in zip(per_day_a, per_day_b)])
    ci = {}
    if per_day_a.size >= 2:
        ci = {
            "alpha": confidence_interval(per_day_a, level),
            "beta": confidence_interval(per_day_b, level),
            "opi": confidence_interval(per_day_o, level),
        }
    return MetricsReport(
        alpha=a,
        beta=b,
        opi=opi(a, b, lam),
        lam=lam,
        per_day_alpha=tuple(map(float, per_day_a)),
        per_day_beta=tuple(map(float, per_day_b)),
        per_day_opi=tuple(map(float, per_day_o)),
        ci95=ci,
    )

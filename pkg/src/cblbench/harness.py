"""Experiment matrix runner and report emission.

A run evaluates every (method, control fraction, mode, event day) cell for
each seed.  All cells of one seed share a dataset; the RCT split of a cell
depends only on (seed, control fraction), so dropping a fraction from the
config leaves the other cells untouched.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from decimal import Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import (
    HighXofYConfig,
    PopulationSplit,
    eligible_days,
    high_x_of_y_matrix,
    rct_split,
)
from .errors import CBLError, ConfigError, EmissionError
from .meterdata import (
    EventSchedule,
    LoadDataset,
    read_interval_csv,
    resample_to_hourly,
    validate,
)
from .metrics import confidence_interval, opi
from .settlement import TariffSchedule, micro_to_decimal, ptr_settle, settle_matrix
from .synthgen import SynthConfig, default_event_schedule, generate

log = logging.getLogger(__name__)

METHODS = ("highxofy", "rct")
MODES = ("granular", "aggregated")
SCHEMA_VERSION = 1
WORKERS_ENV = "CBLBENCH_WORKERS"

METRICS_COLUMNS = (
    "method", "mode", "control_pct", "alpha", "beta", "opi",
    "alpha_ci_lo", "alpha_ci_hi", "beta_ci_lo", "beta_ci_hi", "opi_ci_lo", "opi_ci_hi",
    "n_control", "n_treatment",
)
SETTLEMENT_COLUMNS = (
    "method", "mode", "control_pct", "event_day", "flr_kwh", "flr_pct",
    "rebate_usd", "revenue_usd", "rebate_pct",
)
SETTLEMENT_SUMMARY_COLUMNS = (
    "method", "mode", "control_pct", "flr_pct", "flr_pct_ci_lo", "flr_pct_ci_hi",
    "rebate_pct", "rebate_pct_ci_lo", "rebate_pct_ci_hi", "rebate_usd", "revenue_usd",
)
CELL_COLUMNS = (
    "method", "mode", "control_pct", "event_day", "alpha", "beta", "opi",
)
FIGURE_COLUMNS = ("method", "control_pct", "value", "ci_lo", "ci_hi")
# figure name suffix -> metrics/settlement summary field
FIGURE_QUANTITIES = {
    "accuracy": "alpha",
    "bias": "beta",
    "opi": "opi",
    "flr_pct": "flr_pct",
    "rebate_pct": "rebate_pct",
}


class ExperimentError(CBLError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data_source: SynthConfig | str = field(default_factory=SynthConfig)
    methods: tuple[str, ...] = METHODS
    highxofy: HighXofYConfig = field(default_factory=HighXofYConfig)
    control_fractions: tuple[float, ...] = (0.05, 0.10, 0.15, 0.20, 0.25)
    modes: tuple[str, ...] = MODES
    schedule: EventSchedule | str = "auto"
    tariff: TariffSchedule = field(default_factory=TariffSchedule)
    lam: float = 0.5
    seeds: tuple[int, ...] = (0,)
    metric_window: str = "event"  # "event" hours only, or the full "day"
    formats: tuple[str, ...] = ("csv", "json")
    output_dir: str | None = None
    workers: int | None = None

    def __post_init__(self):
        for name in ("methods", "control_fractions", "modes", "seeds", "formats"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.check()

    def check(self) -> None:
        def sub(name, allowed):
            vals = getattr(self, name)
            if not vals:
                raise ConfigError(f"{name} must not be empty")
            bad = [v for v in vals if v not in allowed]
            if bad:
                raise ConfigError(f"unknown {name}: {bad}")
            if len(set(vals)) != len(vals):
                raise ConfigError(f"duplicate entries in {name}")

        sub("methods", METHODS)
        sub("modes", MODES)
        sub("formats", ("csv", "json"))
        if not self.control_fractions or not self.seeds:
            raise ConfigError("control_fractions and seeds must not be empty")
        if len(set(self.control_fractions)) != len(self.control_fractions):
            raise ConfigError("duplicate control fractions")
        if any(not 0 < f < 1 for f in self.control_fractions):
            raise ConfigError("control fractions must be in (0, 1)")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("duplicate seeds")
        if self.metric_window not in ("event", "day"):
            raise ConfigError("metric_window must be 'event' or 'day'")
        if not 0 <= self.lam <= 1:
            raise ConfigError("lambda must be in [0, 1]")
        if self.schedule != "auto" and not isinstance(self.schedule, EventSchedule):
            raise ConfigError("schedule must be 'auto' or an EventSchedule")

    # --- JSON round trip ---

    def to_dict(self, runtime: bool = True) -> dict:
        """Plain-data form.  ``runtime=False`` drops output_dir and workers,
        which never influence results, so manifests stay byte-stable."""
        if isinstance(self.data_source, SynthConfig):
            data = {"synthetic": self.data_source.to_dict()}
        else:
            data = {"path": str(self.data_source)}
        if isinstance(self.schedule, EventSchedule):
            schedule = {
                "event_days": [d.isoformat() for d in self.schedule.event_days],
                "event_window": list(self.schedule.event_window),
                "holidays": sorted(d.isoformat() for d in self.schedule.holidays),
            }
        else:
            schedule = self.schedule
        out = {
            "data": data,
            "methods": list(self.methods),
            "highxofy": asdict(self.highxofy),
            "control_fractions": list(self.control_fractions),
            "modes": list(self.modes),
            "schedule": schedule,
            "tariff": asdict(self.tariff),
            "lambda": self.lam,
            "seeds": list(self.seeds),
            "metric_window": self.metric_window,
            "formats": list(self.formats),
        }
        if runtime:
            out["output_dir"] = self.output_dir
            out["workers"] = self.workers
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {
            "data", "methods", "highxofy", "control_fractions", "modes", "schedule",
            "tariff", "lambda", "seeds", "metric_window", "formats", "output_dir", "workers",
        }
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kw = {}
        try:
            if "data" in d:
                data = d["data"]
                if "synthetic" in data:
                    kw["data_source"] = SynthConfig.from_dict(data["synthetic"] or {})
                elif "path" in data:
                    kw["data_source"] = str(data["path"])
                else:
                    raise ConfigError("data needs a 'synthetic' or 'path' entry")
            if "highxofy" in d:
                kw["highxofy"] = HighXofYConfig(**d["highxofy"])
            if "tariff" in d:
                kw["tariff"] = TariffSchedule(**d["tariff"])
            if "schedule" in d:
                s = d["schedule"]
                if isinstance(s, dict):
                    kw["schedule"] = EventSchedule(
                        tuple(date.fromisoformat(x) for x in s["event_days"]),
                        tuple(s.get("event_window", (15, 21))),
                        frozenset(date.fromisoformat(x) for x in s.get("holidays", ())),
                    )
                else:
                    kw["schedule"] = s
            if "lambda" in d:
                kw["lam"] = float(d["lambda"])
            for name in ("methods", "modes", "formats"):
                if name in d:
                    kw[name] = tuple(d[name])
            if "control_fractions" in d:
                kw["control_fractions"] = tuple(float(f) for f in d["control_fractions"])
            if "seeds" in d:
                kw["seeds"] = tuple(int(s) for s in d["seeds"])
            for name in ("metric_window", "output_dir", "workers"):
                if name in d:
                    kw[name] = d[name]
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --- results ---


@dataclass(frozen=True)
class CellResult:
    seed: int
    method: str
    control_fraction: float
    mode: str
    event_day: date
    alpha: float
    beta: float
    opi: float
    flr_kwh: float
    consumption_kwh: float
    flr_pct: float
    rebate_pct: float
    rebate_micro: int
    revenue_micro: int


@dataclass(frozen=True)
class SummaryRow:
    seed: int
    method: str
    mode: str
    control_fraction: float
    n_control: int
    n_treatment: int
    alpha: float
    beta: float
    opi: float
    alpha_ci: tuple[float, float]
    beta_ci: tuple[float, float]
    opi_ci: tuple[float, float]
    flr_pct: float
    flr_pct_ci: tuple[float, float]
    rebate_pct: float
    rebate_pct_ci: tuple[float, float]
    rebate_micro: int
    revenue_micro: int


@dataclass(frozen=True)
class ReportBundle:
    config: ExperimentConfig
    cells: tuple[CellResult, ...]
    summary: tuple[SummaryRow, ...]
    event_days: dict  # seed -> tuple of event days

    def manifest(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "package": "cblbench",
            "version": __version__,
            "config": self.config.to_dict(runtime=False),
            "seeds": list(self.config.seeds),
            "event_days": {
                str(s): [d.isoformat() for d in days] for s, days in sorted(self.event_days.items())
            },
        }

    def rows(self, seed: int | None = None, **match) -> list:
        out = [r for r in self.summary if seed is None or r.seed == seed]
        return [r for r in out if all(getattr(r, k) == v for k, v in match.items())]

    def cells_for(self, seed: int | None = None, **match) -> list:
        out = [c for c in self.cells if seed is None or c.seed == seed]
        return [c for c in out if all(getattr(c, k) == v for k, v in match.items())]


# --- running ---


def split_seed(seed: int, fraction: float) -> int:
    """Split seed derived from (run seed, fraction value), not its position."""
    key = int(round(fraction * 1_000_000))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def load_dataset(cfg: ExperimentConfig, seed: int) -> LoadDataset:
    if isinstance(cfg.data_source, SynthConfig):
        return generate(replace(cfg.data_source, seed=int(seed)))
    d = read_interval_csv(cfg.data_source)
    if d.slots_per_day != 24:
        d = resample_to_hourly(d)
    report = validate(d)
    if not report.ok:
        raise ExperimentError(f"{cfg.data_source}: dataset failed validation ({report.summary()})")
    return d


def resolve_schedule(cfg: ExperimentConfig, d: LoadDataset) -> EventSchedule:
    if isinstance(cfg.schedule, EventSchedule):
        cfg.schedule.check_against(d)
        return cfg.schedule
    hx = cfg.highxofy
    history = hx.y if hx.include_weekends else 2 * hx.y
    return default_event_schedule(d, min_history=history)


def _workers(cfg: ExperimentConfig) -> int:
    if cfg.workers is not None:
        n = int(cfg.workers)
    else:
        n = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, n)


class _SeedContext:
    """Per-seed shared state: dataset, schedule and HighXofY history indices."""

    def __init__(self, cfg: ExperimentConfig, seed: int, dataset: LoadDataset | None = None):
        self.cfg = cfg
        self.seed = seed
        self.d = dataset if dataset is not None else load_dataset(cfg, seed)
        self.schedule = resolve_schedule(cfg, self.d)
        self.day_idx = [self.d.day_index(day) for day in self.schedule.event_days]
        if cfg.metric_window == "event":
            self.slots = list(self.schedule.window_slots)
        else:
            self.slots = list(range(self.d.slots_per_day))
        self.history = {}
        if "highxofy" in cfg.methods:
            for day in self.schedule.event_days:
                try:
                    days = eligible_days(self.d, self.schedule, day, cfg.highxofy)
                except CBLError as exc:
                    raise ExperimentError(
                        f"method=highxofy event_day={day} seed={seed}: {exc}"
                    ) from exc
                self.history[day] = [self.d.day_index(x) for x in days]
        self._hxy_granular = None

    def hxy_granular(self) -> np.ndarray:
        # (customers, event days, slots); shared across fractions
        if self._hxy_granular is None:
            x = self.cfg.highxofy.x
            self._hxy_granular = np.stack(
                [high_x_of_y_matrix(self.d.readings, self.history[day], x)
                 for day in self.schedule.event_days],
                axis=1,
            )
        return self._hxy_granular


def _baselines(ctx: _SeedContext, method: str, mode: str, split: PopulationSplit):
    """Baseline and actual arrays ``(subjects, event days, slots)`` for one cell."""
    d = ctx.d
    t_idx = d.customer_indices(split.treatment)
    c_idx = d.customer_indices(split.control)
    actual = d.readings[t_idx][:, ctx.day_idx, :]
    n_t, n_c = len(t_idx), len(c_idx)
    if method == "highxofy":
        if mode == "granular":
            return ctx.hxy_granular()[t_idx], actual
        series = d.readings[t_idx].sum(axis=0)[None]
        base = np.stack(
            [high_x_of_y_matrix(series, ctx.history[day], ctx.cfg.highxofy.x)[0]
             for day in ctx.schedule.event_days]
        )
        return base[None], actual.sum(axis=0)[None]
    control = d.readings[c_idx][:, ctx.day_idx, :].sum(axis=0)
    if mode == "granular":
        mean = control / n_c
        return np.broadcast_to(mean, (n_t,) + mean.shape), actual
    return (control * (n_t / n_c))[None], actual.sum(axis=0)[None]


def _run_cell(ctx: _SeedContext, method: str, fraction: float, mode: str, split: PopulationSplit):
    cfg = ctx.cfg
    base, actual = _baselines(ctx, method, mode, split)
    scale = len(split.treatment) if mode == "aggregated" else 1
    err = (base[:, :, ctx.slots] - actual[:, :, ctx.slots]) / scale
    alpha_d = np.abs(err).mean(axis=(0, 2))
    beta_d = err.mean(axis=(0, 2))
    window = ctx.schedule.event_window
    cells = []
    for k, day in enumerate(ctx.schedule.event_days):
        if mode == "granular":
            rec = settle_matrix(base[:, k, :], actual[:, k, :], window, cfg.tariff, day)
        else:
            rec = ptr_settle(base[0, k], actual[0, k], window, cfg.tariff, "aggregate", day)
        a, b = float(alpha_d[k]), float(beta_d[k])
        cells.append(CellResult(
            ctx.seed, method, fraction, mode, day, a, b, opi(a, b, cfg.lam),
            rec.flr_kwh, rec.consumption_kwh, rec.flr_pct, rec.rebate_pct,
            rec.rebate_micro, rec.revenue_micro,
        ))
    a_all = float(np.abs(err).mean())
    b_all = float(err.mean())
    per_day_opi = [c.opi for c in cells]

    def ci(vals):
        return confidence_interval(vals) if len(vals) >= 2 else (float(vals[0]), float(vals[0]))

    summary = SummaryRow(
        seed=ctx.seed, method=method, mode=mode, control_fraction=fraction,
        n_control=len(split.control), n_treatment=len(split.treatment),
        alpha=a_all, beta=b_all, opi=opi(a_all, b_all, cfg.lam),
        alpha_ci=ci(alpha_d), beta_ci=ci(beta_d), opi_ci=ci(per_day_opi),
        flr_pct=float(np.mean([c.flr_pct for c in cells])),
        flr_pct_ci=ci([c.flr_pct for c in cells]),
        rebate_pct=float(np.mean([c.rebate_pct for c in cells])),
        rebate_pct_ci=ci([c.rebate_pct for c in cells]),
        rebate_micro=sum(c.rebate_micro for c in cells),
        revenue_micro=sum(c.revenue_micro for c in cells),
    )
    return cells, summary


def _run_fraction(ctx: _SeedContext, fraction: float):
    cfg = ctx.cfg
    split = rct_split(ctx.d.customers, fraction, split_seed(ctx.seed, fraction))
    out = {}
    for method in cfg.methods:
        for mode in cfg.modes:
            try:
                out[method, mode] = _run_cell(ctx, method, fraction, mode, split)
            except (CBLError, ValueError) as exc:
                raise ExperimentError(
                    f"method={method} fraction={fraction} mode={mode} seed={ctx.seed}: {exc}"
                ) from exc
    return out


def run_experiment(cfg: ExperimentConfig, dataset: LoadDataset | None = None) -> ReportBundle:
    """Evaluate the full matrix.  ``dataset`` overrides the data source
    (the same dataset is then used for every seed)."""
    n_workers = _workers(cfg)
    cells, summary, event_days = [], [], {}
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        for seed in cfg.seeds:
            try:
                ctx = _SeedContext(cfg, seed, dataset)
            except ExperimentError:
                raise
            except (CBLError, ValueError, OSError) as exc:
                raise ExperimentError(f"seed={seed}: {exc}") from exc
            event_days[seed] = ctx.schedule.event_days
            if "highxofy" in cfg.methods and "granular" in cfg.modes:
                ctx.hxy_granular()
            futures = {f: pool.submit(_run_fraction, ctx, f) for f in cfg.control_fractions}
            results = {f: fut.result() for f, fut in futures.items()}
            # fixed reduction order: method, fraction, mode, day
            for method in cfg.methods:
                for f in cfg.control_fractions:
                    for mode in cfg.modes:
                        c, s = results[f][method, mode]
                        cells.extend(c)
                        summary.append(s)
            log.info("seed %s: %d cells", seed, len(cfg.methods) * len(cfg.modes)
                     * len(cfg.control_fractions) * len(ctx.schedule.event_days))
    return ReportBundle(cfg, tuple(cells), tuple(summary), event_days)


# --- emission ---


def _pct(fraction: float) -> float:
    return round(fraction * 100, 9)


def _usd(micro: int) -> Decimal:
    return micro_to_decimal(micro)


def _metrics_rows(rows):
    for r in rows:
        yield [
            r.method, r.mode, _pct(r.control_fraction), r.alpha, r.beta, r.opi,
            *r.alpha_ci, *r.beta_ci, *r.opi_ci, r.n_control, r.n_treatment,
        ]


def _settlement_rows(cells):
    for c in cells:
        yield [
            c.method, c.mode, _pct(c.control_fraction), c.event_day.isoformat(),
            c.flr_kwh, c.flr_pct, _usd(c.rebate_micro), _usd(c.revenue_micro), c.rebate_pct,
        ]


def _settlement_summary_rows(rows):
    for r in rows:
        yield [
            r.method, r.mode, _pct(r.control_fraction), r.flr_pct, *r.flr_pct_ci,
            r.rebate_pct, *r.rebate_pct_ci, _usd(r.rebate_micro), _usd(r.revenue_micro),
        ]


def _cell_rows(cells):
    for c in cells:
        yield [c.method, c.mode, _pct(c.control_fraction), c.event_day.isoformat(),
               c.alpha, c.beta, c.opi]


def figure_tables(bundle: ReportBundle, seed: int) -> dict[str, list[list]]:
    """Bar-chart data: one table per (mode, quantity), one row per
    (method, fraction) with its 95% interval."""
    out = {}
    for mode in bundle.config.modes:
        for name, attr in FIGURE_QUANTITIES.items():
            rows = []
            for r in bundle.rows(seed, mode=mode):
                lo, hi = getattr(r, attr + "_ci")
                rows.append([r.method, _pct(r.control_fraction), getattr(r, attr), lo, hi])
            out[f"{mode}_{name}"] = rows
    return out


def _cell_text(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, Decimal):
        return float(v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def _csv_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows([_cell_text(v) for v in row] for row in rows)
    return buf.getvalue().encode("utf-8")


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _dicts(columns, rows):
    return [{k: _json_value(v) for k, v in zip(columns, row)} for row in rows]


def render(bundle: ReportBundle, formats=None) -> dict[str, bytes]:
    """All output files as ``relative path -> bytes``."""
    formats = tuple(formats or bundle.config.formats)
    files = {}
    for seed in bundle.config.seeds:
        summary = bundle.rows(seed)
        cells = bundle.cells_for(seed)
        tables = {
            "metrics": (METRICS_COLUMNS, list(_metrics_rows(summary))),
            "settlement": (SETTLEMENT_COLUMNS, list(_settlement_rows(cells))),
            "settlement_summary": (SETTLEMENT_SUMMARY_COLUMNS, list(_settlement_summary_rows(summary))),
            "cells": (CELL_COLUMNS, list(_cell_rows(cells))),
        }
        figures = figure_tables(bundle, seed)
        if "csv" in formats:
            base = f"csv/seed-{seed}"
            for name, (cols, rows) in tables.items():
                files[f"{base}/{name}.csv"] = _csv_bytes(cols, rows)
            for name, rows in figures.items():
                files[f"{base}/figures/{name}.csv"] = _csv_bytes(FIGURE_COLUMNS, rows)
        if "json" in formats:
            doc = {
                "schema_version": SCHEMA_VERSION,
                "seed": seed,
                **{name: _dicts(cols, rows) for name, (cols, rows) in tables.items()},
                "figures": {name: _dicts(FIGURE_COLUMNS, rows) for name, rows in figures.items()},
            }
            files[f"json/seed-{seed}.json"] = _json_bytes(doc)
    manifest = bundle.manifest()
    manifest["files"] = sorted(files)
    files["run.json"] = _json_bytes(manifest)
    return files


def emit_report(bundle: ReportBundle, out_dir, formats=None) -> list[Path]:
    """Write the bundle under ``out_dir``.

    Files are staged in a temporary directory and renamed into place; a
    failure while staging leaves nothing behind.
    """
    out = Path(out_dir)
    try:
        files = render(bundle, formats)
        out.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    except OSError as exc:
        raise EmissionError(f"cannot prepare {out}: {exc}") from exc
    written = []
    try:
        for rel, data in files.items():
            p = staging / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            with open(p, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
        for rel in files:
            dest = out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(staging / rel, dest)
            written.append(dest)
    except OSError as exc:
        raise EmissionError(f"writing report to {out} failed: {exc}") from exc
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return written


def load_manifest(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        m = json.load(fh)
    if m.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported manifest schema {m.get('schema_version')!r}")
    return ExperimentConfig.from_dict(m["config"])

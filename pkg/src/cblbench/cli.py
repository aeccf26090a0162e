"""Command line entry point: ``cblbench {generate,validate,baseline,run,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

from . import __version__
from .baseline import (
    HighXofYConfig,
    high_x_of_y,
    rct_baseline_aggregated,
    rct_baseline_granular,
    rct_split,
    write_baseline_csv,
)
from .errors import CBLError
from .harness import ExperimentConfig, emit_report, load_manifest, run_experiment
from .meterdata import (
    EventSchedule,
    aggregate,
    read_interval_csv,
    resample_to_hourly,
    save_interval_csv,
    validate,
    write_interval_csv,
)
from .synthgen import SynthConfig, generate


def _date_list(text: str) -> list[date]:
    return [date.fromisoformat(x.strip()) for x in text.split(",") if x.strip()]


def _window(text: str) -> tuple[int, int]:
    lo, hi = (int(x) for x in text.split(","))
    return lo, hi


def _load(path: str):
    d = read_interval_csv(path)
    if d.slots_per_day != 24:
        d = resample_to_hourly(d)
    return d


def cmd_generate(args) -> int:
    cfg = SynthConfig(
        n_customers=args.customers,
        year=args.year,
        seed=args.seed,
        target_per_capita=args.target,
        noise_cv=args.noise_cv,
        customer_scale_dispersion=args.dispersion,
    )
    d = generate(cfg)
    if args.out == "-":
        write_interval_csv(d, sys.stdout)
    else:
        save_interval_csv(d, args.out)
        print(f"wrote {len(d.customers)} customers x {len(d.days)} days to {args.out}",
              file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    d = read_interval_csv(args.path)
    report = validate(d)
    print(f"{args.path}: {len(d.customers)} customers, {len(d.days)} days, "
          f"{d.slots_per_day} slots/day: {report.summary()}")
    for label, items in (("missing", report.missing_cells), ("negative", report.negative_cells)):
        for cust, day, slot in items[: args.limit]:
            print(f"  {label}: {cust} {day} slot {slot}")
    for day in report.gap_days[: args.limit]:
        print(f"  gap day: {day}")
    return 0 if report.ok else 1


def cmd_baseline(args) -> int:
    if args.data:
        d = _load(args.data)
    else:
        d = generate(SynthConfig(n_customers=args.customers, seed=args.seed))
    events = sorted(set(_date_list(args.events or "")) | {args.event})
    schedule = EventSchedule(tuple(events), _window(args.window),
                             frozenset(_date_list(args.holidays or "")))
    schedule.check_against(d)
    if args.method == "highxofy":
        cfg = HighXofYConfig(x=args.x, y=args.y, include_weekends=not args.no_weekends)
        if args.mode == "aggregated":
            curves = [high_x_of_y(aggregate(d, d.customers), schedule, args.event, cfg)]
        else:
            curves = high_x_of_y(d, schedule, args.event, cfg)
    else:
        split = rct_split(d.customers, args.fraction, args.split_seed)
        if args.mode == "aggregated":
            curves = [rct_baseline_aggregated(d, split, args.event)]
        else:
            curves = rct_baseline_granular(d, split, args.event)
    if args.out == "-":
        write_baseline_csv(curves, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_baseline_csv(curves, fh)
    return 0


def _finish_run(cfg: ExperimentConfig, out: str | None) -> int:
    if not out:
        raise CBLError("no output directory: pass --out or set output_dir in the config")
    bundle = run_experiment(cfg)
    written = emit_report(bundle, out, cfg.formats)
    print(f"wrote {len(written)} files under {out}", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.formats:
        overrides["formats"] = tuple(args.formats.split(","))
    if args.out:
        overrides["output_dir"] = args.out
    cfg = replace(cfg, **overrides)
    return _finish_run(cfg, cfg.output_dir)


def cmd_report(args) -> int:
    cfg = load_manifest(args.manifest)
    out = args.out or str(Path(args.manifest).parent)
    overrides = {"output_dir": out}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.formats:
        overrides["formats"] = tuple(args.formats.split(","))
    return _finish_run(replace(cfg, **overrides), out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cblbench", description=__doc__)
    p.add_argument("--version", action="version", version=f"cblbench {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as interval CSV")
    g.add_argument("--customers", type=int, default=199)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--year", type=int, default=2012)
    g.add_argument("--target", type=float, default=1.9, help="per-capita kWh/hour")
    g.add_argument("--noise-cv", type=float, default=SynthConfig.noise_cv)
    g.add_argument("--dispersion", type=float, default=SynthConfig.customer_scale_dispersion)
    g.add_argument("--out", required=True, help="output CSV path, or - for stdout")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="check an interval CSV for gaps and bad values")
    v.add_argument("path")
    v.add_argument("--limit", type=int, default=20, help="findings to print per kind")
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("baseline", help="dump baseline curves for one event day")
    b.add_argument("--data", help="interval CSV; synthetic data when omitted")
    b.add_argument("--customers", type=int, default=199)
    b.add_argument("--seed", type=int, default=0, help="synthetic data seed")
    b.add_argument("--method", choices=("highxofy", "rct"), required=True)
    b.add_argument("--mode", choices=("granular", "aggregated"), default="granular")
    b.add_argument("--x", type=int, default=5)
    b.add_argument("--y", type=int, default=10)
    b.add_argument("--no-weekends", action="store_true", help="skip weekends in the lookback")
    b.add_argument("--event", type=date.fromisoformat, required=True)
    b.add_argument("--events", help="comma-separated other event days (excluded from lookback)")
    b.add_argument("--holidays", help="comma-separated holiday dates")
    b.add_argument("--window", default="15,21", help="event slots as start,end")
    b.add_argument("--fraction", type=float, default=0.05, help="RCT control fraction")
    b.add_argument("--split-seed", type=int, default=0)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_baseline)

    r = sub.add_parser("run", help="run the full experiment matrix")
    r.add_argument("--config", help="JSON experiment config")
    r.add_argument("--seed", type=int, action="append", help="repeatable; overrides config seeds")
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", type=int)
    r.add_argument("--formats", help="comma-separated subset of csv,json")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("report", help="re-run and re-emit a bundle from its run.json manifest")
    m.add_argument("--manifest", required=True)
    m.add_argument("--out", help="defaults to the manifest's directory")
    m.add_argument("--workers", type=int)
    m.add_argument("--formats")
    m.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CBLError, ValueError, OSError) as exc:
        print(f"cblbench {args.command}: error: {exc}", file=sys.stderr)
        return 1

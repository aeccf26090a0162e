"""Customer baseline load benchmarking: HighXofY and RCT baselines, error
metrics and Peak Time Rebate settlement on residential load data."""

__version__ = "0.1.0"

from .baseline import (  # noqa: E402
    AGGREGATE,
    BaselineCurve,
    HighXofYConfig,
    PopulationSplit,
    eligible_days,
    high_x_of_y,
    rct_baseline_aggregated,
    rct_baseline_granular,
    rct_split,
)
from .meterdata import (  # noqa: E402
    EventSchedule,
    IntervalLayout,
    LoadDataset,
    LoadSeries,
    ValidationReport,
    aggregate,
    parse_interval_csv,
    resample_to_hourly,
    validate,
)
from .metrics import EvalWindow, MetricsReport, bias, confidence_interval, evaluate, mae, opi, per_capita  # noqa: E402
from .settlement import SettlementRecord, SettlementReport, TariffSchedule, ptr_settle, settle_population  # noqa: E402
from .synthgen import SynthConfig, default_event_schedule, generate  # noqa: E402
from .harness import ExperimentConfig, ReportBundle, emit_report, run_experiment  # noqa: E402

__all__ = [
    "AGGREGATE", "BaselineCurve", "HighXofYConfig", "PopulationSplit", "eligible_days",
    "high_x_of_y", "rct_baseline_aggregated", "rct_baseline_granular", "rct_split",
    "EventSchedule", "IntervalLayout", "LoadDataset", "LoadSeries", "ValidationReport",
    "aggregate", "parse_interval_csv", "resample_to_hourly", "validate",
    "EvalWindow", "MetricsReport", "bias", "confidence_interval", "evaluate", "mae", "opi",
    "per_capita", "SettlementRecord", "SettlementReport", "TariffSchedule", "ptr_settle",
    "settle_population", "SynthConfig", "default_event_schedule", "generate",
    "ExperimentConfig", "ReportBundle", "emit_report", "run_experiment",
]

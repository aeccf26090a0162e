"""
Peak Time Rebate settlement
===========================

No customer in the synthetic data responds to events, so every kWh of
"reduction" the baseline credits is false.  This script prices it.
"""

# %%
import numpy as np

from cblbench import ExperimentConfig, TariffSchedule, ptr_settle, run_experiment

# The worked example: baseline 2 kWh, actual 1 kWh through six event hours.
b = np.ones(24)
b[15:21] = 2.0
rec = ptr_settle(b, np.ones(24), (15, 21), TariffSchedule())
print(f"FLR {rec.flr_kwh} kWh, rebate ${rec.rebate}, revenue ${rec.revenue}, "
      f"FLR {rec.flr_pct:.2f}%, rebate {rec.rebate_pct:.2f}% of revenue")
print(f"rebate%/FLR% = {rec.rebate_pct / rec.flr_pct:.4f} = 0.35/0.097")

# %%
bundle = run_experiment(ExperimentConfig(seeds=(0, 1, 2)))
print(f"\n{'method':9s} {'mode':10s} {'control':>7s} {'FLR%':>7s} {'rebate%':>8s} {'rebate $':>10s}")
for r in bundle.summary:
    if r.seed != 0:
        continue
    print(f"{r.method:9s} {r.mode:10s} {r.control_fraction:7.0%} {r.flr_pct:7.2f} "
          f"{r.rebate_pct:8.2f} {r.rebate_micro / 1e6:10.2f}")

# %%
# Aggregating first nets over-estimates against under-estimates, so the
# rebate paid on the summed curve is never larger than the sum of
# per-customer rebates (for RCT this holds exactly).
for f in (0.05, 0.25):
    g = bundle.rows(0, method="rct", mode="granular", control_fraction=f)[0]
    a = bundle.rows(0, method="rct", mode="aggregated", control_fraction=f)[0]
    print(f"RCT {f:.0%}: granular ${g.rebate_micro / 1e6:.2f} >= aggregated ${a.rebate_micro / 1e6:.2f}")

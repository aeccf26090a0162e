"""
Baselines on one event day
==========================

Build a synthetic population, pick the event days, and compare the
HighXofY and RCT baselines against what customers actually used.
Run with ``python3 notebooks/01_baselines.py``.
"""

# %%
import numpy as np

from cblbench import (
    HighXofYConfig,
    SynthConfig,
    aggregate,
    default_event_schedule,
    generate,
    high_x_of_y,
    rct_baseline_aggregated,
    rct_baseline_granular,
    rct_split,
)

d = generate(SynthConfig(seed=7))
print(f"{len(d.customers)} customers x {len(d.days)} days, "
      f"per-capita {d.readings.mean():.3f} kWh/hour")

# %%
# One event day per month: the day with the largest total consumption.
s = default_event_schedule(d)
print("event days:", ", ".join(day.isoformat() for day in s.event_days))
day = s.event_days[6]
j = d.day_index(day)
hours = slice(*s.event_window)

# %%
# HighXofY for a single customer: mean of the 5 highest of the last 10 days.
cfg = HighXofYConfig(x=5, y=10)
curves = high_x_of_y(d, s, day, cfg)
i = 3
print(f"\n{d.customers[i]} on {day}, event hours 15-20")
print("  actual   :", np.round(d.readings[i, j, hours], 2))
print("  HighXofY :", np.round(curves[i].values[hours], 2))

# %%
# RCT: 10% of customers serve as the control group for everyone else.
split = rct_split(d.customers, 0.10, seed=1)
print(f"\ncontrol {len(split.control)}, treatment {len(split.treatment)}")
rct = rct_baseline_granular(d, split, day)
t = d.customer_index(split.treatment[0])
print(f"{split.treatment[0]} actual:", np.round(d.readings[t, j, hours], 2))
print(f"{split.treatment[0]} RCT   :", np.round(rct[0].values[hours], 2))

# %%
# Aggregated mode: one curve for the summed treatment group.
actual = aggregate(d, split.treatment).readings[j, hours]
agg_rct = rct_baseline_aggregated(d, split, day).values[hours]
agg_hxy = high_x_of_y(aggregate(d, split.treatment), s, day, cfg).values[hours]
n_t = len(split.treatment)
print("\nper-capita aggregate, event hours")
print("  actual   :", np.round(actual / n_t, 3))
print("  RCT      :", np.round(agg_rct / n_t, 3))
print("  HighXofY :", np.round(agg_hxy / n_t, 3))
# Summing the granular RCT curves gives the aggregated curve.
print("  sum of granular RCT == aggregated:",
      np.allclose(sum(c.values for c in rct)[hours], agg_rct, rtol=1e-12))

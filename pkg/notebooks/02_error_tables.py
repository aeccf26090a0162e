"""
Error tables: MAE, bias and OPI
===============================

Run the full method x control-fraction x mode matrix over a few seeds and
print tables shaped like a granular and an aggregated error table.
"""

# %%
import numpy as np

from cblbench import ExperimentConfig, run_experiment

cfg = ExperimentConfig(seeds=(0, 1, 2, 3, 4))
bundle = run_experiment(cfg)
print(f"{len(bundle.cells)} cells over {len(cfg.seeds)} seeds")

# %%
def table(mode):
    print(f"\n{mode} (kWh/hour{' per capita' if mode == 'aggregated' else ''}, mean over seeds)")
    print(f"  {'method':9s} {'control':>7s} {'alpha':>7s} {'beta':>7s} {'opi':>7s}")
    for method in cfg.methods:
        for f in cfg.control_fractions:
            rows = bundle.rows(method=method, mode=mode, control_fraction=f)
            a = np.mean([r.alpha for r in rows])
            b = np.mean([r.beta for r in rows])
            o = np.mean([r.opi for r in rows])
            print(f"  {method:9s} {f:7.0%} {a:7.3f} {b:+7.3f} {o:7.3f}")


table("granular")
table("aggregated")

# %%
# Per-event-day spread for one cell, with the 95% interval over 12 days.
r = bundle.rows(0, method="rct", mode="granular", control_fraction=0.25)[0]
print(f"\nseed 0, RCT granular 25%: alpha {r.alpha:.3f}, "
      f"95% CI [{r.alpha_ci[0]:.3f}, {r.alpha_ci[1]:.3f}]")
for c in bundle.cells_for(0, method="rct", mode="granular", control_fraction=0.25)[:4]:
    print(f"  {c.event_day}: alpha {c.alpha:.3f} beta {c.beta:+.3f}")

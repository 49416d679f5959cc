"""Loading monthly data, declaring transforms, aligning, and profiling.

Walks the ingestion layer end to end on a small synthetic panel: a CSV with
a target column plus two predictors that start later and have a gap, the
lagged log-difference transform used for growth-rate predictors, alignment
into a design matrix, and the descriptive diagnostics report.
"""

import tempfile
from pathlib import Path

import numpy as np

from bstskit import Month, Transform, align, apply_transform, diagnostics, load_csv

rng = np.random.default_rng(7)

# --- write a small monthly CSV ---------------------------------------------
# target: 10 years from 2010-01; predictor "activity" starts two years later
# and is missing three interior months; "prices" is strictly positive so the
# log-difference transform applies.
n = 120
rows = ["date,target,activity,prices"]
level = 80 + np.cumsum(rng.normal(0, 1.0, n))
activity = np.cumsum(rng.normal(0, 0.5, n))
prices = 100 * np.exp(np.cumsum(rng.normal(0.002, 0.01, n)))
start = Month(2010, 1)
for t in range(n):
    a = "" if (t < 24 or t in (60, 61, 62)) else f"{activity[t]:.4f}"
    rows.append(f"{start.shift(t)},{level[t]:.4f},{a},{prices[t]:.4f}")

csv_path = Path(tempfile.mkdtemp()) / "panel.csv"
csv_path.write_text("\n".join(rows) + "\n")

table = load_csv(csv_path)
print("columns loaded:", list(table))
for name, series in table.items():
    print(f"  {name}: {series.start}..{series.end} "
          f"({len(series)} months, {int((~series.observed_mask()).sum())} missing)")

# --- transforms -------------------------------------------------------------
# growth predictors usually enter as ln(x[t-1]) - ln(x[t-4]); the output
# loses its four leading months
growth = apply_transform(table["prices"], Transform.log_diff(1, 4))
print(f"\nprices -> 3-month lagged log growth: starts {growth.start}, "
      f"mean {growth.observed_values().mean():+.5f}")

# --- alignment ---------------------------------------------------------------
matrix = align(table["target"], [table["activity"], growth])
print(f"\naligned design: {matrix.n_rows} rows x {matrix.n_columns} columns "
      f"({matrix.months[0]}..{matrix.months[-1]})")
print("dropped constant columns:", matrix.dropped_constant or "none")

# the three-month interior gap in "activity" removes exactly three rows
span = matrix.months[-1] - matrix.months[0] + 1
print(f"rows dropped inside the span: {span - matrix.n_rows}")

# --- diagnostics --------------------------------------------------------------
report = diagnostics(table["target"])
print("\ntarget diagnostics:")
for key, value in report.as_dict().items():
    print(f"  {key}: {value}")

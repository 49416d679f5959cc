"""Comparing forecasters: error metrics, Murphy curves, and mean ranks.

Three synthetic forecasters of the same test window: one sharp, one biased,
one noisy.  Metrics rank them pointwise; the Murphy curves show the sharp
model dominating across the whole family of elementary losses; the
mean-rank comparison across many evaluation windows flags which gaps are
significant.
"""

import numpy as np

from bstskit import (mcb, metrics, murphy_difference, murphy_scores)
from bstskit.evaluation import default_theta_grid

rng = np.random.default_rng(41)

# --- one evaluation window ----------------------------------------------------
h, T = 24, 200
train = 100 + np.cumsum(rng.normal(0, 1.2, T))
actual = train[-1] + np.cumsum(rng.normal(0.2, 1.0, h))

forecasts = {
    "sharp": actual + rng.normal(0.0, 1.0, h),
    "biased": actual + 4.0 + rng.normal(0.0, 1.0, h),
    "noisy": actual + rng.normal(0.0, 4.0, h),
}

print("metric table (one window):")
print("model    rmse    mae    mape%   smape%  mase")
for name, fc in forecasts.items():
    r = metrics(actual, fc, train)
    print(f"{name:7s} {r.rmse:6.2f} {r.mae:6.2f} {r.mape:7.2f} "
          f"{r.smape:7.2f} {r.mase:5.2f}")

# --- Murphy diagram -------------------------------------------------------------
grid = default_theta_grid(actual, forecasts.values())
curves = murphy_scores(actual, forecasts, grid)
print("\nmean elementary scores at selected thresholds:")
picks = np.linspace(10, len(grid) - 10, 5).astype(int)
print("theta    " + "  ".join(f"{grid[i]:8.1f}" for i in picks))
for name, curve in curves.items():
    print(f"{name:7s}  " + "  ".join(f"{curve.scores[i]:8.3f}" for i in picks))

diff = murphy_difference(curves["sharp"], curves["biased"])
favored = np.mean(diff.upper < 0)
print(f"\nsharp vs biased: score difference negative (sharp better) over "
      f"{np.mean(diff.diff < 0):.0%} of thresholds, "
      f"significantly so over {favored:.0%}")

# --- mean ranks across many windows ---------------------------------------------
D = 12
errors = np.empty((D, 3))
for d in range(D):
    a = 100 + np.cumsum(rng.normal(0.1, 1.0, h))
    errors[d, 0] = metrics(a, a + rng.normal(0, 1.0, h), train).rmse
    errors[d, 1] = metrics(a, a + 4.0 + rng.normal(0, 1.0, h), train).rmse
    errors[d, 2] = metrics(a, a + rng.normal(0, 4.0, h), train).rmse

result = mcb(errors, models=("sharp", "biased", "noisy"))
print(f"\nmean ranks over {D} windows (half-width {result.half_width:.2f}):")
for model, rank in zip(result.models, result.mean_ranks):
    lo, hi = result.intervals()[model]
    tag = "  <- significantly worse than best" if model in result.significantly_worse else ""
    print(f"  {model:7s} {rank:.2f}  [{lo:.2f}, {hi:.2f}]{tag}")
print(f"best model: {result.best}")

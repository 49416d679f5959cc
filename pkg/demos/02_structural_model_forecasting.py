"""Fitting a structural model with many candidate predictors and forecasting.

Simulates a monthly series with level drift, seasonality, and three active
predictors hidden among twenty-seven decoys, fits the Gibbs sampler, and
shows which predictors the spike-and-slab layer keeps, plus a 12-month
posterior-predictive fan.
"""

import numpy as np

import bstskit
from bstskit import (Autoregressive, LocalLevel, McmcConfig,
                     RegressionPriorConfig, Seasonal, fit, forecast,
                     inclusion_probabilities)

rng = np.random.default_rng(11)

# --- simulate ---------------------------------------------------------------
n, horizon, n_predictors = 240, 12, 30
X_all = rng.standard_normal((n + horizon, n_predictors))
beta = np.zeros(n_predictors)
beta[[2, 11, 23]] = [1.4, -1.1, 0.9]

season = 5.0 * np.sin(2 * np.pi * np.arange(n + horizon) / 12)
level = 50 + np.cumsum(rng.normal(0, 0.25, n + horizon))
y_all = level + season + X_all @ beta + rng.normal(0, 1.0, n + horizon)

y_train, X_train = y_all[:n], X_all[:n]
X_future = X_all[n:]

# --- fit ----------------------------------------------------------------------
components = [LocalLevel(0.1), Autoregressive((0.0,), 0.1), Seasonal(12, 0.1)]
draws = fit(
    components, y_train, X=X_train,
    regression_prior=RegressionPriorConfig(expected_size=5.0),
    mcmc=McmcConfig(iterations=800, burn_in=200, seed=1, chains=2),
)
print(f"retained draws: {draws.n_draws} (2 chains)")
print(f"posterior median observation sd: "
      f"{np.median(np.sqrt(draws.sigma2_eps)):.3f} (truth 1.0)")

print("\ntop predictors by inclusion probability:")
for name, prob in inclusion_probabilities(draws)[:6]:
    truth = " <- active" if int(name[1:]) in (2, 11, 23) else ""
    print(f"  {name}: {prob:.2f}{truth}")

# --- forecast ------------------------------------------------------------------
fc = forecast(draws, horizon, x_future=X_future, level=0.9, rng=2)
print(f"\n{horizon}-month forecast vs realized (90% interval):")
hits = 0
for j in range(horizon):
    inside = fc.lower[j] <= y_all[n + j] <= fc.upper[j]
    hits += inside
    marker = "in " if inside else "OUT"
    print(f"  h={j + 1:2d}: mean {fc.mean[j]:7.2f}  "
          f"[{fc.lower[j]:7.2f}, {fc.upper[j]:7.2f}]  realized {y_all[n + j]:7.2f} {marker}")
print(f"interval hits: {hits}/{horizon}")

# posterior-predictive mean is the point forecast used for error metrics
report = bstskit.metrics(y_all[n:], fc.mean, y_train)
print(f"\nRMSE {report.rmse:.3f}  MAE {report.mae:.3f}  "
      f"MAPE {report.mape:.2f}%  SMAPE {report.smape:.2f}%  MASE {report.mase:.3f}")

"""Point-forecast error metrics, Murphy diagrams, and mean-rank comparison.

Metric formulas over a test window of length h with training series of
length T:

* RMSE  = sqrt(mean((y - yhat)^2))
* MAE   = mean(|y - yhat|)
* MAPE  = mean(|yhat - y| / |y|) * 100
* SMAPE = mean(|yhat - y| / ((|yhat| + |y|) / 2)) * 100
* MASE  = sum(|yhat - y|) / ((h / (T - 1)) * sum_{t=2..T} |y_t - y_{t-1}|)

MASE is reported as undefined at h = 1 (the single-step reporting
convention), MAPE flips to an infinite flag when any actual is zero, and
percentages keep the x100 scaling.

The Murphy elementary score is |y - theta| when min(yhat, y) <= theta <
max(yhat, y) and zero otherwise; averaging over the window and sweeping
theta traces how each forecaster performs across all loss shapes.  Mean-rank
comparison ranks models per dataset (1 = best, ties averaged) and draws a
critical half-width q * sqrt(M (M+1) / (12 D)) using the upper-0.05
studentized-range quantile, the usual choice for multiple-comparison plots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata, studentized_range


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    mape: float
    smape: float
    mase: float | None
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "mape": self.mape,
                "smape": self.smape, "mase": self.mase, "flags": list(self.flags)}


def metrics(actual, forecast, train) -> MetricReport:
    """Error metrics of one forecast path against the realized values."""
    y = np.asarray(actual, dtype=float)
    yhat = np.asarray(forecast, dtype=float)
    tr = np.asarray(train, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1 or y.size == 0:
        raise ValueError("actual and forecast must be equal-length 1-d arrays")

    err = y - yhat
    abs_err = np.abs(err)
    h = y.size
    flags: list[str] = []

    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(abs_err))

    if np.any(y == 0.0):
        mape = math.inf
        flags.append("mape_infinite_zero_actual")
    else:
        mape = float(np.mean(abs_err / np.abs(y)) * 100.0)
    smape = float(np.mean(abs_err / ((np.abs(yhat) + np.abs(y)) / 2.0)) * 100.0)

    mase: float | None
    if h == 1:
        mase = None
        flags.append("mase_undefined_single_step")
    else:
        if tr.size < 2:
            raise ValueError("training series must have at least 2 observations for MASE")
        denom = (h / (tr.size - 1)) * float(np.sum(np.abs(np.diff(tr))))
        if denom == 0.0:
            mase = None
            flags.append("mase_degenerate_denominator")
        else:
            mase = float(np.sum(abs_err) / denom)

    return MetricReport(rmse=rmse, mae=mae, mape=mape, smape=smape, mase=mase,
                        flags=tuple(flags))


# ---------------------------------------------------------------------------
# Murphy diagrams


@dataclass(frozen=True)
class MurphyCurve:
    model: str
    theta: np.ndarray       # ascending grid
    scores: np.ndarray      # mean elementary score per theta
    elementary: np.ndarray  # (n_times, n_theta) per-time scores


@dataclass(frozen=True)
class MurphyDifference:
    model_a: str
    model_b: str
    theta: np.ndarray
    diff: np.ndarray       # S_a - S_b; negative favors model a
    lower: np.ndarray
    upper: np.ndarray


def default_theta_grid(actuals, forecasts, points: int = 501) -> np.ndarray:
    """Equally spaced grid over the pooled range, padded 1% on each side."""
    pool = [np.asarray(actuals, dtype=float)]
    for f in forecasts:
        pool.append(np.asarray(f, dtype=float))
    stacked = np.concatenate(pool)
    lo, hi = float(stacked.min()), float(stacked.max())
    pad = 0.01 * (hi - lo) if hi > lo else max(0.01 * abs(hi), 1.0)
    return np.linspace(lo - pad, hi + pad, points)


def elementary_score(forecast, actual, theta) -> np.ndarray:
    """|y - theta| inside the half-open window [min(yhat, y), max(yhat, y))."""
    yhat = np.asarray(forecast, dtype=float)[:, None]
    y = np.asarray(actual, dtype=float)[:, None]
    th = np.asarray(theta, dtype=float)[None, :]
    inside = (np.minimum(yhat, y) <= th) & (th < np.maximum(yhat, y))
    return np.where(inside, np.abs(y - th), 0.0)


def murphy_scores(actuals, forecasts: dict, theta_grid=None) -> dict[str, MurphyCurve]:
    """Mean elementary scores per model over a shared theta grid."""
    y = np.asarray(actuals, dtype=float)
    if theta_grid is None:
        theta_grid = default_theta_grid(y, forecasts.values())
    theta = np.asarray(theta_grid, dtype=float)
    if theta.size == 0 or np.any(np.diff(theta) < 0):
        raise ValueError("theta grid must be non-empty and ascending")

    out: dict[str, MurphyCurve] = {}
    for name, fc in forecasts.items():
        fc = np.asarray(fc, dtype=float)
        if fc.shape != y.shape:
            raise ValueError(f"forecast {name!r} does not match the actuals' length")
        elem = elementary_score(fc, y, theta)
        out[name] = MurphyCurve(model=name, theta=theta,
                                scores=elem.mean(axis=0), elementary=elem)
    return out


def murphy_difference(curve_a: MurphyCurve, curve_b: MurphyCurve,
                      ci_multiplier: float = 1.96) -> MurphyDifference:
    """Score difference with a HAC band over the per-time differences.

    Bartlett truncation ceil(h^(1/3)) accounts for overlapping multi-step
    errors; negative values favor ``curve_a``.
    """
    if curve_a.theta.shape != curve_b.theta.shape or not np.allclose(curve_a.theta, curve_b.theta):
        raise ValueError("curves must share the same theta grid")
    if curve_a.elementary.shape != curve_b.elementary.shape:
        raise ValueError("curves must come from the same evaluation sample")

    d_t = curve_a.elementary - curve_b.elementary     # (h, n_theta)
    h = d_t.shape[0]
    diff = d_t.mean(axis=0)
    trunc = min(h - 1, math.ceil(h ** (1.0 / 3.0))) if h > 1 else 0

    centered = d_t - diff[None, :]
    var = np.mean(centered**2, axis=0)
    for lag in range(1, trunc + 1):
        w = 1.0 - lag / (trunc + 1.0)
        cov = np.mean(centered[lag:] * centered[:-lag], axis=0)
        var = var + 2.0 * w * cov
    se = np.sqrt(np.maximum(var, 0.0) / h)
    return MurphyDifference(
        model_a=curve_a.model, model_b=curve_b.model, theta=curve_a.theta,
        diff=diff, lower=diff - ci_multiplier * se, upper=diff + ci_multiplier * se,
    )


# ---------------------------------------------------------------------------
# mean-rank multiple comparison


@dataclass(frozen=True)
class McbResult:
    models: tuple[str, ...]
    mean_ranks: np.ndarray        # (M,)
    half_width: float
    q_statistic: float
    best: str
    significantly_worse: tuple[str, ...]

    def intervals(self) -> dict[str, tuple[float, float]]:
        return {
            m: (float(r - self.half_width), float(r + self.half_width))
            for m, r in zip(self.models, self.mean_ranks)
        }

    def as_dict(self) -> dict:
        return {
            "models": list(self.models),
            "mean_ranks": list(map(float, self.mean_ranks)),
            "half_width": self.half_width,
            "q_statistic": self.q_statistic,
            "best": self.best,
            "significantly_worse": list(self.significantly_worse),
            "intervals": {m: list(v) for m, v in self.intervals().items()},
        }


def mcb(errors, models=None, alpha: float = 0.05) -> McbResult:
    """Rank models (1 = best) per dataset and compare against the best.

    ``errors`` is a (D, M) array of error values, one row per dataset; ties
    get average ranks.  A model whose interval lies entirely above the best
    model's upper limit is flagged significantly worse.
    """
    err = np.asarray(errors, dtype=float)
    if err.ndim != 2:
        raise ValueError("errors must be a (datasets, models) array")
    D, M = err.shape
    if D < 2 or M < 2:
        raise ValueError("need at least 2 datasets and 2 models")
    if np.isnan(err).any():
        raise ValueError("missing cells are not allowed")
    if models is None:
        models = tuple(f"model{i}" for i in range(M))
    models = tuple(models)
    if len(models) != M:
        raise ValueError("model names must match the number of columns")

    ranks = rankdata(err, method="average", axis=1)
    mean_ranks = ranks.mean(axis=0)

    q = float(studentized_range.ppf(1.0 - alpha, M, np.inf))
    if not np.isfinite(q):  # older scipy: fall back to a huge df
        q = float(studentized_range.ppf(1.0 - alpha, M, 1e9))
    half_width = q * math.sqrt(M * (M + 1) / (12.0 * D))

    best_idx = int(np.argmin(mean_ranks))
    best_upper = mean_ranks[best_idx] + half_width
    worse = tuple(
        models[j] for j in range(M)
        if j != best_idx and mean_ranks[j] - half_width > best_upper
    )
    return McbResult(models=models, mean_ranks=mean_ranks, half_width=float(half_width),
                     q_statistic=q, best=models[best_idx], significantly_worse=worse)

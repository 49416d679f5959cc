"""Impulse responses by direct h-step regressions with HAC standard errors.

For each horizon h the response at t+h is regressed on the shock at t, p
lags of both response and shock, an intercept, and (optionally) a linear
trend.  The shock coefficient is scaled by one sample standard deviation of
the shock, bands are point +/- ci_multiplier * HAC standard error, and the
HAC truncation grows with the horizon (L = h), the usual choice for the
overlapping h-step errors.  The estimation sample is trimmed once so every
horizon uses the same rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


@dataclass(frozen=True)
class LpConfig:
    horizons: int = 24            # responses estimated for h = 0..horizons
    max_lags: int = 12
    lags: int | None = None       # fixed lag order; None selects by BIC
    trend: str = "linear"         # "none" or "linear"
    ci_multiplier: float = 1.96

    def __post_init__(self):
        if self.horizons < 1:
            raise ValueError("horizons must be >= 1")
        if self.max_lags < 1:
            raise ValueError("max_lags must be >= 1")
        if self.trend not in ("none", "linear"):
            raise ValueError("trend must be 'none' or 'linear'")


@dataclass(frozen=True)
class IrfResult:
    shock: str
    response: str
    horizons: np.ndarray   # 0..H
    point: np.ndarray      # scaled shock coefficient per horizon
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    lag_order: int
    shock_sd: float
    controls: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "shock": self.shock,
            "response": self.response,
            "lag_order": int(self.lag_order),
            "shock_sd": float(self.shock_sd),
            "horizons": [int(h) for h in self.horizons],
            "point": list(map(float, self.point)),
            "se": list(map(float, self.se)),
            "lower": list(map(float, self.lower)),
            "upper": list(map(float, self.upper)),
        }


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


def newey_west(X: np.ndarray, residuals: np.ndarray, truncation: int) -> np.ndarray:
    """Bartlett-kernel HAC covariance of the OLS coefficients.

    With truncation 0 this reduces to the White heteroskedasticity-robust
    covariance.  The result is PSD by construction of the kernel weights
    w_l = 1 - l / (L + 1).
    """
    X = np.asarray(X, dtype=float)
    u = np.asarray(residuals, dtype=float)
    n, k = X.shape
    if u.shape[0] != n:
        raise ValueError("residuals must match the design rows")
    if truncation < 0:
        raise ValueError("truncation must be >= 0")

    xtx = X.T @ X
    try:
        bread = np.linalg.inv(xtx)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular X'X in the HAC sandwich: {exc}") from exc

    scores = X * u[:, None]
    meat = scores.T @ scores
    for lag in range(1, truncation + 1):
        w = 1.0 - lag / (truncation + 1.0)
        gamma = scores[lag:].T @ scores[:-lag]
        meat += w * (gamma + gamma.T)
    cov = bread @ meat @ bread
    return 0.5 * (cov + cov.T)


def _build_design(response: np.ndarray, shock: np.ndarray, controls: np.ndarray | None,
                  p: int, horizon: int, max_horizon: int, use_trend: bool):
    """Common-sample design for one horizon: rows t = p .. n-1-max_horizon."""
    n = response.size
    t0, t1 = p, n - max_horizon  # t in [t0, t1)
    rows = np.arange(t0, t1)
    target = response[rows + horizon]

    cols = [np.ones(rows.size), shock[rows]]
    names = ["const", "shock"]
    if use_trend:
        cols.insert(1, rows.astype(float))
        names.insert(1, "trend")
    for lag in range(1, p + 1):
        cols.append(response[rows - lag])
        names.append(f"response_lag{lag}")
    for lag in range(1, p + 1):
        cols.append(shock[rows - lag])
        names.append(f"shock_lag{lag}")
    if controls is not None and controls.size:
        for j in range(controls.shape[1]):
            cols.append(controls[rows, j])
            names.append(f"control{j}")
    return np.column_stack(cols), target, names


def select_lags_bic(response, shock, max_lags: int = 12, trend: str = "linear") -> int:
    """Lag order minimizing the BIC of the horizon-0 regression.

    Candidates 1..max_lags are compared on the common sample that supports
    the largest candidate.
    """
    resp, shk = _values(response), _values(shock)
    if resp.shape != shk.shape:
        raise ValueError("response and shock must have equal lengths")
    if resp.size <= 3 * max_lags + 3:
        raise ValueError("series too short for the requested maximum lag")
    use_trend = trend == "linear"

    n = resp.size
    rows = np.arange(max_lags, n)
    target = resp[rows]
    best_p, best_bic = 1, np.inf
    for p in range(1, max_lags + 1):
        cols = [np.ones(rows.size), shk[rows]]
        if use_trend:
            cols.insert(1, rows.astype(float))
        for lag in range(1, p + 1):
            cols.append(resp[rows - lag])
        for lag in range(1, p + 1):
            cols.append(shk[rows - lag])
        design = np.column_stack(cols)
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < design.shape[1]:
            continue
        resid = target - design @ coef
        rss = float(resid @ resid)
        k = design.shape[1]
        bic = rows.size * np.log(max(rss, 1e-300) / rows.size) + k * np.log(rows.size)
        if bic < best_bic:
            best_bic, best_p = bic, p
    return best_p


def lp_irf(response, shock, controls=None, cfg: LpConfig = LpConfig(),
           shock_name: str = "shock", response_name: str = "response") -> IrfResult:
    """Estimate the impulse response of ``response`` to a one-SD shock.

    ``controls`` is an optional (n, c) array entered contemporaneously.
    """
    resp, shk = _values(response), _values(shock)
    if resp.shape != shk.shape:
        raise ValueError("response and shock must have equal lengths")
    ctrl = None
    if controls is not None:
        ctrl = np.asarray(controls, dtype=float)
        if ctrl.ndim == 1:
            ctrl = ctrl[:, None]
        if ctrl.shape[0] != resp.size:
            raise ValueError("controls must align with the response")

    p = cfg.lags if cfg.lags is not None else select_lags_bic(
        resp, shk, cfg.max_lags, cfg.trend
    )
    H = cfg.horizons
    n = resp.size
    n_regressors = 2 + (cfg.trend == "linear") + 2 * p + (ctrl.shape[1] if ctrl is not None else 0)
    if n - H - p <= n_regressors:
        raise ValueError("not enough observations for the requested horizons and lags")

    use_trend = cfg.trend == "linear"
    sample_rows = np.arange(p, n - H)
    shock_sd = float(np.std(shk[sample_rows], ddof=1))

    horizons = np.arange(H + 1)
    point = np.empty(H + 1)
    se = np.empty(H + 1)
    for h in horizons:
        design, target, names = _build_design(resp, shk, ctrl, p, h, H, use_trend)
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < design.shape[1]:
            raise ValueError(f"rank-deficient regressor matrix at horizon {h}")
        resid = target - design @ coef
        cov = newey_west(design, resid, truncation=int(h))
        j = names.index("shock")
        point[h] = coef[j] * shock_sd
        se[h] = np.sqrt(max(cov[j, j], 0.0)) * shock_sd

    half = cfg.ci_multiplier * se
    return IrfResult(
        shock=shock_name, response=response_name, horizons=horizons,
        point=point, se=se, lower=point - half, upper=point + half,
        lag_order=p, shock_sd=shock_sd,
    )

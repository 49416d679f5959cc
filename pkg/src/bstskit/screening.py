"""Predictor screening: transfer entropy, Granger tests, cross-correlation,
wavelet coherence, and a Y/N decision table over a candidate set.

Estimator conventions:

* Transfer entropy uses plug-in Shannon entropies (nats) over a quantile-bin
  discretization (default 3 bins) of each full series.  Significance comes
  from circular shifts of the source series (one-sided, default 200), which
  preserve the target's autocorrelation.
* The Granger lag is picked by AIC over 1..max_lag unless fixed.
* Cross-correlations standardize over the per-lag overlap window; the
  per-lag significance bound is 1.96/sqrt(n), while the screening decision
  applies a Bonferroni-corrected bound across the scanned lags.
* Wavelet coherence uses a Morlet mother on a dyadic scale grid, Gaussian
  time smoothing (width proportional to scale) composed with a 0.6-octave
  boxcar over scale, and an AR(1)-matched red-noise surrogate null.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d, uniform_filter1d
from scipy.stats import f as f_dist
from scipy.stats import norm

from .timeseries import DesignMatrix, TimeSeries, align

logger = logging.getLogger(__name__)


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")


# ---------------------------------------------------------------------------
# transfer entropy


@dataclass(frozen=True)
class TeConfig:
    lag: int = 1
    bins: int = 3
    shuffles: int = 200
    alpha: float = 0.05

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.lag < 1:
            raise ValueError("lag must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")


def _quantile_symbols(vals: np.ndarray, bins: int) -> np.ndarray:
    if np.all(vals == vals[0]):
        raise ValueError("constant series: quantile bins are undefined")
    edges = np.quantile(vals, np.arange(1, bins) / bins)
    return np.searchsorted(edges, vals, side="right")


def _entropy_from_codes(codes: np.ndarray) -> float:
    counts = np.bincount(codes)
    p = counts[counts > 0] / codes.size
    return float(-np.sum(p * np.log(p)))


def _te_from_symbols(sx: np.ndarray, sy: np.ndarray, lag: int, bins: int) -> float:
    y_fwd = sy[lag:]
    y_past = sy[:-lag]
    x_past = sx[:-lag]
    b = bins
    h_yp_xp = _entropy_from_codes(y_past * b + x_past)
    h_yf_yp_xp = _entropy_from_codes((y_fwd * b + y_past) * b + x_past)
    h_yf_yp = _entropy_from_codes(y_fwd * b + y_past)
    h_yp = _entropy_from_codes(y_past)
    te = h_yp_xp - h_yf_yp_xp + h_yf_yp - h_yp
    if te < 0.0:
        if te < -1e-9:
            logger.warning("transfer entropy clamp of magnitude %.3e", -te)
        te = 0.0
    return te


def transfer_entropy(x, y, lag: int = 1, bins: int = 3) -> float:
    """Directed information flow from ``x`` to ``y``, in nats, >= 0."""
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError("x and y must have equal lengths")
    if xv.size - lag < 50:
        raise ValueError("need at least 50 aligned observations after lagging")
    sx = _quantile_symbols(xv, bins)
    sy = _quantile_symbols(yv, bins)
    return _te_from_symbols(sx, sy, lag, bins)


@dataclass(frozen=True)
class TeResult:
    te: float
    p_value: float
    threshold: float
    significant: bool


def transfer_entropy_test(x, y, cfg: TeConfig = TeConfig(), rng=0) -> TeResult:
    """Transfer entropy with a circular-shift surrogate null for the source."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError("x and y must have equal lengths")
    if xv.size - cfg.lag < 50:
        raise ValueError("need at least 50 aligned observations after lagging")
    sx = _quantile_symbols(xv, cfg.bins)
    sy = _quantile_symbols(yv, cfg.bins)
    observed = _te_from_symbols(sx, sy, cfg.lag, cfg.bins)

    n = sx.size
    surrogate = np.empty(cfg.shuffles)
    for s in range(cfg.shuffles):
        shift = int(rng.integers(1, n))
        surrogate[s] = _te_from_symbols(np.roll(sx, shift), sy, cfg.lag, cfg.bins)
    threshold = float(np.quantile(surrogate, 1.0 - cfg.alpha))
    p_value = float((1 + np.sum(surrogate >= observed)) / (1 + cfg.shuffles))
    return TeResult(observed, p_value, threshold, bool(observed > threshold))


def net_information_flow(x, y, cfg: TeConfig = TeConfig()) -> float:
    """TE(x -> y) - TE(y -> x); positive means x drives y.  Antisymmetric."""
    return transfer_entropy(x, y, cfg.lag, cfg.bins) - transfer_entropy(
        y, x, cfg.lag, cfg.bins
    )


# ---------------------------------------------------------------------------
# Granger causality


@dataclass(frozen=True)
class GrangerConfig:
    max_lag: int = 12
    alpha: float = 0.05
    lag: int | None = None  # fixed order; None selects by AIC

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.max_lag < 1:
            raise ValueError("max_lag must be >= 1")


def _lag_matrix(v: np.ndarray, p: int, start: int) -> np.ndarray:
    """Columns v[t-1], ..., v[t-p] for t = start..n-1."""
    return np.column_stack([v[start - k : v.size - k] for k in range(1, p + 1)])


def _ols_rss(design: np.ndarray, target: np.ndarray) -> float:
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise ValueError("collinear lag matrix in the Granger regression")
    resid = target - design @ coef
    return float(resid @ resid)


def granger_test(x, y, p: int) -> tuple[float, float]:
    """F test of whether lags of ``x`` improve the prediction of ``y``.

    Restricted: y_t on an intercept and p own lags.  Unrestricted: plus p
    lags of x.  Returns (F, p-value) with F ~ F(p, n - 2p - 1) under the
    null, where n counts the regression rows.
    """
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError("x and y must have equal lengths")
    if p < 1:
        raise ValueError("lag order must be >= 1")
    n_rows = yv.size - p
    df2 = n_rows - 2 * p - 1
    if df2 <= 0:
        raise ValueError("series too short for the requested lag order")

    target = yv[p:]
    ones = np.ones((n_rows, 1))
    own = _lag_matrix(yv, p, p)
    cross = _lag_matrix(xv, p, p)
    rss_restricted = _ols_rss(np.hstack([ones, own]), target)
    rss_unrestricted = _ols_rss(np.hstack([ones, own, cross]), target)

    f_stat = ((rss_restricted - rss_unrestricted) / p) / (rss_unrestricted / df2)
    p_value = float(f_dist.sf(f_stat, p, df2))
    return float(f_stat), p_value


def select_granger_lag(x, y, max_lag: int = 12) -> int:
    """AIC over the unrestricted regression, compared on a common sample."""
    xv, yv = _values(x), _values(y)
    n = yv.size
    if n - max_lag - 2 * max_lag - 1 <= 0:
        max_lag = max(1, (n - 2) // 3)
    best_lag, best_aic = 1, np.inf
    target = yv[max_lag:]
    n_rows = target.size
    for p in range(1, max_lag + 1):
        own = _lag_matrix(yv, p, max_lag)
        cross = _lag_matrix(xv, p, max_lag)
        design = np.hstack([np.ones((n_rows, 1)), own, cross])
        try:
            rss = _ols_rss(design, target)
        except ValueError:
            continue
        aic = n_rows * math.log(max(rss, 1e-300) / n_rows) + 2 * (2 * p + 1)
        if aic < best_aic:
            best_aic, best_lag = aic, p
    return best_lag


# ---------------------------------------------------------------------------
# cross-correlation


@dataclass(frozen=True)
class CcfConfig:
    max_lag: int = 12
    alpha: float = 0.05

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.max_lag < 1:
            raise ValueError("max_lag must be >= 1")


@dataclass(frozen=True)
class CrossCorrelation:
    lags: np.ndarray        # k in [-max_lag, max_lag]
    rho: np.ndarray
    bound: float            # 1.96 / sqrt(n)
    significant: np.ndarray  # |rho| > bound, per lag


def cross_correlation(x, y, max_lag: int) -> CrossCorrelation:
    """rho_XY(k) = corr(x_{t-k}, y_t), standardized on each overlap window."""
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError("x and y must have equal lengths")
    n = xv.size
    if n <= max_lag + 2:
        raise ValueError("series too short for the requested maximum lag")

    lags = np.arange(-max_lag, max_lag + 1)
    rho = np.empty(lags.size)
    for i, k in enumerate(lags):
        if k >= 0:
            xs, ys = xv[: n - k], yv[k:]
        else:
            xs, ys = xv[-k:], yv[: n + k]
        sx = xs.std()
        sy = ys.std()
        if sx == 0.0 or sy == 0.0:
            raise ValueError("zero variance in an overlap window")
        rho[i] = float(np.mean((xs - xs.mean()) * (ys - ys.mean())) / (sx * sy))
    bound = 1.96 / math.sqrt(n)
    return CrossCorrelation(lags, rho, bound, np.abs(rho) > bound)


# ---------------------------------------------------------------------------
# wavelet coherence


@dataclass(frozen=True)
class WaveletConfig:
    omega0: float = 6.0
    scales_per_octave: int = 8
    octaves: int | None = None
    alpha: float = 0.05
    surrogates: int = 100
    area_threshold: float = 0.05

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")


@dataclass(frozen=True)
class WaveletCoherence:
    periods: np.ndarray       # (J,)
    scales: np.ndarray        # (J,)
    coherence: np.ndarray     # (J, n) in [0, 1]
    coi: np.ndarray           # (n,) max reliable period per time
    off_cone: np.ndarray      # (J, n) bool
    threshold: np.ndarray | None   # (J,) per-scale significance level
    significant: np.ndarray | None  # (J, n) bool, off-cone and above threshold
    significant_area: float | None  # fraction of off-cone cells significant
    decision: bool | None


def _morlet_cwt(vals: np.ndarray, scales: np.ndarray, omega0: float) -> np.ndarray:
    n = vals.size
    n_pad = int(2 ** math.ceil(math.log2(n)))
    x = np.zeros(n_pad)
    x[:n] = vals - vals.mean()
    freqs = 2.0 * np.pi * np.fft.fftfreq(n_pad, d=1.0)
    xf = np.fft.fft(x)
    out = np.empty((scales.size, n), dtype=complex)
    positive = freqs > 0
    for j, s in enumerate(scales):
        daughter = np.zeros(n_pad)
        daughter[positive] = (
            math.pi**-0.25
            * math.sqrt(2.0 * math.pi * s)
            * np.exp(-0.5 * (s * freqs[positive] - omega0) ** 2)
        )
        out[j] = np.fft.ifft(xf * daughter)[:n]
    return out


def _smooth(field: np.ndarray, scales: np.ndarray, scales_per_octave: int) -> np.ndarray:
    """Gaussian in time with width ~ scale, boxcar over 0.6 octave of scales."""
    sm = np.empty_like(field)
    for j, s in enumerate(scales):
        if np.iscomplexobj(field):
            sm[j] = gaussian_filter1d(field[j].real, sigma=s, mode="reflect") + 1j * (
                gaussian_filter1d(field[j].imag, sigma=s, mode="reflect")
            )
        else:
            sm[j] = gaussian_filter1d(field[j], sigma=s, mode="reflect")
    width = max(1, int(round(0.6 * scales_per_octave)))
    if width % 2 == 0:
        width += 1
    if width > 1:
        if np.iscomplexobj(sm):
            sm = uniform_filter1d(sm.real, width, axis=0, mode="nearest") + 1j * (
                uniform_filter1d(sm.imag, width, axis=0, mode="nearest")
            )
        else:
            sm = uniform_filter1d(sm, width, axis=0, mode="nearest")
    return sm


def _coherence_field(xv: np.ndarray, yv: np.ndarray, scales: np.ndarray,
                     cfg: WaveletConfig) -> np.ndarray:
    wx = _morlet_cwt(xv, scales, cfg.omega0)
    wy = _morlet_cwt(yv, scales, cfg.omega0)
    inv_s = 1.0 / scales[:, None]
    sxy = _smooth(wx * np.conj(wy) * inv_s, scales, cfg.scales_per_octave)
    sxx = _smooth(np.abs(wx) ** 2 * inv_s, scales, cfg.scales_per_octave)
    syy = _smooth(np.abs(wy) ** 2 * inv_s, scales, cfg.scales_per_octave)
    return np.abs(sxy) ** 2 / (sxx * syy)


def _ar1_coefficient(vals: np.ndarray) -> float:
    v = vals - vals.mean()
    denom = float(v @ v)
    if denom == 0.0:
        return 0.0
    r = float(v[1:] @ v[:-1]) / denom
    return float(np.clip(r, -0.95, 0.95))


def wavelet_coherence(x, y, cfg: WaveletConfig = WaveletConfig(), rng=0) -> WaveletCoherence:
    """Squared wavelet coherence of two equal-length series on a dyadic grid.

    The decision is Y when the share of off-cone cells exceeding the
    red-noise significance level is larger than ``cfg.area_threshold``.
    Set ``cfg.surrogates`` to 0 to skip the significance machinery.
    """
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError("x and y must have equal lengths")
    n = xv.size
    if n < 64:
        raise ValueError("need at least 64 observations for wavelet coherence")

    s0 = 2.0
    max_octaves = math.floor(math.log2(n / (2.0 * s0)))
    octaves = cfg.octaves if cfg.octaves is not None else max_octaves
    if octaves > max_octaves:
        raise ValueError(
            f"series of length {n} too short for {octaves} octaves (max {max_octaves})"
        )
    n_scales = octaves * cfg.scales_per_octave + 1
    scales = s0 * 2.0 ** (np.arange(n_scales) / cfg.scales_per_octave)

    fourier_factor = 4.0 * math.pi / (cfg.omega0 + math.sqrt(2.0 + cfg.omega0**2))
    periods = fourier_factor * scales
    dist = np.minimum(np.arange(n), np.arange(n)[::-1]) + 1e-9
    coi = fourier_factor * math.sqrt(2.0) / 2.0 * dist
    off_cone = periods[:, None] < coi[None, :]

    coherence = _coherence_field(xv, yv, scales, cfg)

    threshold = significant = None
    area = decision = None
    if cfg.surrogates > 0:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        rx, ry = _ar1_coefficient(xv), _ar1_coefficient(yv)
        null_values = [[] for _ in range(n_scales)]
        for _ in range(cfg.surrogates):
            sx = _red_noise(n, rx, rng)
            sy = _red_noise(n, ry, rng)
            surr = _coherence_field(sx, sy, scales, cfg)
            for j in range(n_scales):
                vals_j = surr[j][off_cone[j]]
                if vals_j.size:
                    null_values[j].append(vals_j)
        threshold = np.array([
            np.quantile(np.concatenate(v), 1.0 - cfg.alpha) if v else np.nan
            for v in null_values
        ])
        significant = off_cone & (coherence > threshold[:, None])
        n_off = int(off_cone.sum())
        area = float(significant.sum() / n_off) if n_off else 0.0
        decision = bool(area > cfg.area_threshold)

    return WaveletCoherence(periods, scales, coherence, coi, off_cone,
                            threshold, significant, area, decision)


def _red_noise(n: int, r: float, rng) -> np.ndarray:
    z = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = z[0]
    scale = math.sqrt(1.0 - r * r)
    for t in range(1, n):
        out[t] = r * out[t - 1] + scale * z[t]
    return out


# ---------------------------------------------------------------------------
# the combined screen


@dataclass(frozen=True)
class ScreenConfig:
    te: TeConfig = field(default_factory=TeConfig)
    granger: GrangerConfig = field(default_factory=GrangerConfig)
    ccf: CcfConfig = field(default_factory=CcfConfig)
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    retention: str | int = "any"   # "any" | "majority" | "all" | minimum vote count
    seed: int = 0
    threads: int = 1

    def min_votes(self) -> int:
        if isinstance(self.retention, int):
            return self.retention
        return {"any": 1, "majority": 3, "all": 4}[self.retention]


@dataclass(frozen=True)
class ScreenRow:
    predictor: str
    te: float | None
    te_p: float | None
    te_significant: bool
    gc_f: float | None
    gc_p: float | None
    gc_lag: int | None
    gc_significant: bool
    cc_rho: float | None       # rho at the largest |rho| lag
    cc_lag: int | None
    cc_significant: bool
    wc_area: float | None
    wc_significant: bool
    retained: bool
    error: str | None = None

    def decisions(self) -> tuple[bool, bool, bool, bool]:
        return (self.te_significant, self.gc_significant,
                self.cc_significant, self.wc_significant)


@dataclass(frozen=True)
class CausalReport:
    target: str
    rows: tuple[ScreenRow, ...]
    retained: tuple[str, ...]

    def to_csv_text(self) -> str:
        def yn(flag: bool) -> str:
            return "Y" if flag else "N"

        lines = ["variable,TE,GC,CC,W,retained"]
        for row in self.rows:
            lines.append(
                f"{row.predictor},{yn(row.te_significant)},{yn(row.gc_significant)},"
                f"{yn(row.cc_significant)},{yn(row.wc_significant)},{yn(row.retained)}"
            )
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "retained": list(self.retained),
            "rows": [
                {
                    "predictor": r.predictor,
                    "te": r.te, "te_p": r.te_p, "te_significant": r.te_significant,
                    "gc_f": r.gc_f, "gc_p": r.gc_p, "gc_lag": r.gc_lag,
                    "gc_significant": r.gc_significant,
                    "cc_rho": r.cc_rho, "cc_lag": r.cc_lag,
                    "cc_significant": r.cc_significant,
                    "wc_area": r.wc_area, "wc_significant": r.wc_significant,
                    "retained": r.retained,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }


def screen_all(dataset, target: str | None = None,
               cfg: ScreenConfig = ScreenConfig()) -> CausalReport:
    """Run all four methods for every predictor against the target.

    ``dataset`` is an aligned :class:`DesignMatrix`, or a mapping of name ->
    :class:`TimeSeries` together with the target's name (alignment is then
    performed here).  Per-predictor failures are recorded in the report, not
    raised.
    """
    if isinstance(dataset, DesignMatrix):
        matrix = dataset
    else:
        if target is None:
            raise ValueError("target name is required with a series mapping")
        predictors = [s for name, s in dataset.items() if name != target]
        matrix = align(dataset[target], predictors)
    target_name = matrix.target_name
    y = matrix.target

    seeds = np.random.SeedSequence(cfg.seed).spawn(matrix.n_columns)

    def run_one(j: int) -> ScreenRow:
        name = matrix.column_names[j]
        x = matrix.values[:, j]
        try:
            return _screen_one(name, x, y, cfg, seeds[j])
        except Exception as exc:  # aggregated, not fatal
            logger.warning("screening failed for %s: %s", name, exc)
            return ScreenRow(name, None, None, False, None, None, None, False,
                             None, None, False, None, False, retained=False,
                             error=str(exc))

    if cfg.threads > 1 and matrix.n_columns > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(run_one, range(matrix.n_columns)))
    else:
        rows = [run_one(j) for j in range(matrix.n_columns)]

    retained = tuple(r.predictor for r in rows if r.retained)
    return CausalReport(target=target_name, rows=tuple(rows), retained=retained)


def _screen_one(name: str, x: np.ndarray, y: np.ndarray, cfg: ScreenConfig,
                seed: np.random.SeedSequence) -> ScreenRow:
    rng = np.random.default_rng(seed)
    te_res = transfer_entropy_test(x, y, cfg.te, rng)

    gc_lag = cfg.granger.lag or select_granger_lag(x, y, cfg.granger.max_lag)
    gc_f, gc_p = granger_test(x, y, gc_lag)
    gc_sig = gc_p < cfg.granger.alpha

    ccf = cross_correlation(x, y, cfg.ccf.max_lag)
    n_lags = ccf.lags.size
    corrected = norm.ppf(1.0 - cfg.ccf.alpha / (2.0 * n_lags)) / math.sqrt(x.size)
    peak = int(np.argmax(np.abs(ccf.rho)))
    cc_sig = bool(np.abs(ccf.rho[peak]) > corrected)

    wc = wavelet_coherence(x, y, cfg.wavelet, rng)
    wc_sig = bool(wc.decision) if wc.decision is not None else False

    votes = int(te_res.significant) + int(gc_sig) + int(cc_sig) + int(wc_sig)
    return ScreenRow(
        predictor=name,
        te=te_res.te, te_p=te_res.p_value, te_significant=te_res.significant,
        gc_f=gc_f, gc_p=gc_p, gc_lag=gc_lag, gc_significant=bool(gc_sig),
        cc_rho=float(ccf.rho[peak]), cc_lag=int(ccf.lags[peak]),
        cc_significant=cc_sig,
        wc_area=wc.significant_area, wc_significant=wc_sig,
        retained=votes >= cfg.min_votes(),
    )

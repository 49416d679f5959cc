"""Monthly time-series containers, CSV ingestion, transforms, alignment, diagnostics.

Conventions used throughout:

* A series is a run of consecutive calendar months.  A missing entry is
  stored as ``nan``; ``nan`` is never a legitimate observed value.
* Quantiles use linear interpolation between order statistics (numpy's
  default, the "type 7" rule).
* The coefficient of variation is ``100 * sd / mean`` with the sample
  (ddof=1) standard deviation.
* Entropy is the plug-in Shannon entropy, in nats, of an equal-width
  histogram over ``[min, max]``; the default bin count is ``ceil(sqrt(n))``.
* Skewness and kurtosis are the plain standardized sample moments
  (``m3 / m2**1.5`` and ``m4 / m2**2``); both the raw kurtosis and the
  excess form (normal -> 0) are reported.
* The long-range-dependence exponent is the classical rescaled-range
  estimate: OLS slope of ``log(R/S)`` on ``log(block size)`` over dyadic
  block sizes ``8, 16, ..., <= n // 2``.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}


class SchemaError(ValueError):
    """CSV structure problem: bad header, unparseable or duplicated dates."""


class CellError(ValueError):
    """A single non-numeric cell; carries the offending row and column."""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(message)
        self.row = row
        self.column = column


class AlignmentError(ValueError):
    """Target and predictors share no usable dates."""


class TransformDomainError(ValueError):
    """Log transform applied to a nonpositive value."""


_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")


@dataclass(frozen=True, order=True)
class Month:
    """A calendar month, ordered chronologically."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @property
    def index(self) -> int:
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, idx: int) -> "Month":
        return cls(idx // 12, idx % 12 + 1)

    @classmethod
    def parse(cls, text: str) -> "Month":
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise SchemaError(f"cannot parse date {text!r} (expected YYYY-MM or YYYY-MM-DD)")
        return cls(int(m.group(1)), int(m.group(2)))

    def shift(self, months: int) -> "Month":
        return Month.from_index(self.index + months)

    def __sub__(self, other: "Month") -> int:
        return self.index - other.index

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class TimeSeries:
    """A named monthly series; ``nan`` entries mark explicit missing months."""

    name: str
    start: Month
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError(f"series {self.name!r} must hold a non-empty 1-d value array")
        if np.isinf(vals).any():
            raise ValueError(f"series {self.name!r} contains non-finite (inf) values")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end(self) -> Month:
        return self.start.shift(len(self) - 1)

    def months(self) -> list[Month]:
        return [self.start.shift(i) for i in range(len(self))]

    def observed_mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def observed_values(self) -> np.ndarray:
        return self.values[self.observed_mask()]

    def window(self, start: Month | None = None, end: Month | None = None) -> "TimeSeries":
        """Restrict to the months in ``[start, end]`` (inclusive)."""
        lo = self.start if start is None else max(start, self.start)
        hi = self.end if end is None else min(end, self.end)
        if hi < lo:
            raise ValueError(f"window [{lo}, {hi}] is empty for series {self.name!r}")
        i = lo - self.start
        j = hi - self.start
        return TimeSeries(self.name, lo, self.values[i : j + 1].copy())

    def value_at(self, month: Month) -> float:
        if month < self.start or month > self.end:
            return math.nan
        return float(self.values[month - self.start])


@dataclass(frozen=True)
class Transform:
    """identity, log, or the lagged log difference ln(x[t-a]) - ln(x[t-b])."""

    kind: str
    lag_a: int = 0
    lag_b: int = 0

    _KINDS = ("identity", "log", "log_diff")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "log_diff":
            if not (0 <= self.lag_a < self.lag_b):
                raise ValueError("log_diff requires 0 <= lag_a < lag_b")

    @classmethod
    def identity(cls) -> "Transform":
        return cls("identity")

    @classmethod
    def log(cls) -> "Transform":
        return cls("log")

    @classmethod
    def log_diff(cls, lag_a: int, lag_b: int) -> "Transform":
        return cls("log_diff", lag_a, lag_b)

    @classmethod
    def parse(cls, text: str) -> "Transform":
        """Parse ``identity``, ``log`` or ``log_diff(a,b)`` (config-file syntax)."""
        t = text.strip().lower().replace("-", "_")
        if t == "identity":
            return cls.identity()
        if t == "log":
            return cls.log()
        m = re.match(r"^log_diff\(\s*(\d+)\s*,\s*(\d+)\s*\)$", t)
        if m:
            return cls.log_diff(int(m.group(1)), int(m.group(2)))
        raise ValueError(f"cannot parse transform {text!r}")

    def __str__(self) -> str:
        if self.kind == "log_diff":
            return f"log_diff({self.lag_a},{self.lag_b})"
        return self.kind


@dataclass(frozen=True)
class DesignMatrix:
    """Aligned predictors and target.

    Rows are the months where the target and every kept predictor are all
    observed; interior months with any missing entry are dropped, so the
    row dates may be non-contiguous.  Columns with zero variance over the
    kept rows are dropped and recorded in ``dropped_constant``.
    """

    column_names: tuple[str, ...]
    values: np.ndarray  # (n, K)
    target_name: str
    target: np.ndarray  # (n,)
    months: tuple[Month, ...]
    dropped_constant: tuple[str, ...] = field(default=())

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        tgt = np.asarray(self.target, dtype=float)
        if vals.ndim != 2:
            raise ValueError("design matrix values must be 2-d")
        if vals.shape[0] != tgt.size or vals.shape[0] != len(self.months):
            raise ValueError("design matrix rows, target and months must agree")
        if vals.shape[1] != len(self.column_names):
            raise ValueError("column_names must match the number of columns")
        if np.isnan(vals).any() or np.isnan(tgt).any():
            raise ValueError("aligned design matrix may not contain missing cells")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "target", tgt)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]


def load_csv(path, date_column: str | None = None) -> dict[str, TimeSeries]:
    """Read a monthly CSV (header row required) into one series per column.

    The date column defaults to the first column and must parse as YYYY-MM
    or YYYY-MM-DD.  Rows are sorted by date, duplicate months are rejected,
    month gaps become explicit missing entries, and each column is trimmed
    to its own first/last observed month.  Empty cells (or NA/NaN tokens)
    are missing; any other non-numeric cell raises :class:`CellError`.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if date_column is None:
            date_column = header[0]
        if date_column not in header:
            raise SchemaError(f"{path}: date column {date_column!r} not in header {header}")
        date_idx = header.index(date_column)
        value_columns = [h for i, h in enumerate(header) if i != date_idx]
        if not value_columns:
            raise SchemaError(f"{path}: no value columns besides the date column")

        rows: dict[Month, list[float]] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}")
            month = Month.parse(row[date_idx])
            if month in rows:
                raise SchemaError(f"{path}:{line_no}: duplicate month {month}")
            parsed = []
            for i, cell in enumerate(row):
                if i == date_idx:
                    continue
                text = cell.strip()
                if text.lower() in MISSING_TOKENS:
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(text))
                except ValueError:
                    raise CellError(
                        f"{path}:{line_no}: non-numeric cell {cell!r} in column {header[i]!r}",
                        row=line_no,
                        column=header[i],
                    ) from None
            rows[month] = parsed

    if not rows:
        raise SchemaError(f"{path}: no data rows")

    months = sorted(rows)
    start, end = months[0], months[-1]
    n = end - start + 1
    grid = np.full((n, len(value_columns)), np.nan)
    for month, vals in rows.items():
        grid[month - start] = vals

    out: dict[str, TimeSeries] = {}
    for j, name in enumerate(value_columns):
        col = grid[:, j]
        observed = np.flatnonzero(~np.isnan(col))
        if observed.size == 0:
            raise SchemaError(f"{path}: column {name!r} has no numeric observations")
        lo, hi = observed[0], observed[-1]
        out[name] = TimeSeries(name, start.shift(int(lo)), col[lo : hi + 1].copy())
    return out


def apply_transform(series: TimeSeries, transform: Transform) -> TimeSeries:
    """Apply a declared transform; log forms require strictly positive inputs."""
    if transform.kind == "identity":
        return series

    vals = series.values
    if transform.kind == "log":
        _check_positive(series, vals)
        return TimeSeries(series.name, series.start, np.log(vals))

    a, b = transform.lag_a, transform.lag_b
    if len(series) <= b:
        raise ValueError(
            f"series {series.name!r} too short ({len(series)}) for log_diff({a},{b})"
        )
    # value at original index t (t = b..n-1): ln(x[t-a]) - ln(x[t-b])
    _check_positive(series, vals)
    n = len(series)
    lead = vals[b - a : n - a]
    lag = vals[: n - b]
    out = np.log(lead) - np.log(lag)
    return TimeSeries(series.name, series.start.shift(b), out)


def _check_positive(series: TimeSeries, vals: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isnan(vals) & (vals <= 0))
    if bad.size:
        month = series.start.shift(int(bad[0]))
        raise TransformDomainError(
            f"log transform needs positive values; series {series.name!r} has "
            f"{vals[bad[0]]!r} at {month}"
        )


def align(target: TimeSeries, predictors) -> DesignMatrix:
    """Build a design matrix over the months where everything is observed.

    ``predictors`` is any iterable of :class:`TimeSeries` (a dict's values
    work too).  Constant columns are dropped with a warning record.
    """
    if isinstance(predictors, dict):
        predictors = list(predictors.values())
    else:
        predictors = list(predictors)

    lo = target.start
    hi = target.end
    for p in predictors:
        lo = max(lo, p.start)
        hi = min(hi, p.end)
    if hi < lo:
        raise AlignmentError("no overlapping date range between target and predictors")

    months = [lo.shift(i) for i in range(hi - lo + 1)]
    keep = []
    for m in months:
        if math.isnan(target.value_at(m)):
            continue
        if any(math.isnan(p.value_at(m)) for p in predictors):
            continue
        keep.append(m)
    if not keep:
        raise AlignmentError("alignment left no rows (all overlapping months have gaps)")

    y = np.array([target.value_at(m) for m in keep])
    cols = []
    names = []
    dropped = []
    for p in predictors:
        col = np.array([p.value_at(m) for m in keep])
        if np.ptp(col) == 0.0:
            dropped.append(p.name)
            continue
        cols.append(col)
        names.append(p.name)
    if dropped:
        logger.warning("align: dropped constant columns %s", dropped)

    values = np.column_stack(cols) if cols else np.empty((len(keep), 0))
    return DesignMatrix(
        column_names=tuple(names),
        values=values,
        target_name=target.name,
        target=y,
        months=tuple(keep),
        dropped_constant=tuple(dropped),
    )


@dataclass(frozen=True)
class DiagnosticsReport:
    """Summary and shape statistics of a series (training-window style)."""

    minimum: float
    q1: float
    median: float
    mean: float
    q3: float
    maximum: float
    cov: float
    entropy: float
    skewness: float
    kurtosis: float
    excess_kurtosis: float
    hurst: float | None
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "mean": self.mean,
            "q3": self.q3,
            "max": self.maximum,
            "cov": self.cov,
            "entropy": self.entropy,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "excess_kurtosis": self.excess_kurtosis,
            "hurst": self.hurst,
            "flags": list(self.flags),
        }


def diagnostics(series: TimeSeries, bins: int | None = None) -> DiagnosticsReport:
    """Descriptive statistics over the observed entries of ``series``."""
    vals = series.observed_values()
    n = vals.size
    if n == 0:
        raise ValueError(f"series {series.name!r} has no observed values")
    if bins is None:
        bins = max(2, math.ceil(math.sqrt(n)))
    if bins < 2:
        raise ValueError("bins must be >= 2")

    mean = float(np.mean(vals))
    if mean == 0.0:
        raise ValueError("coefficient of variation undefined: series mean is zero")
    sd = float(np.std(vals, ddof=1)) if n > 1 else 0.0
    qs = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")

    flags: list[str] = []
    m2 = float(np.mean((vals - mean) ** 2))
    if m2 == 0.0:
        skew = 0.0
        kurt_raw = 0.0
        flags.append("degenerate_moments")
    else:
        m3 = float(np.mean((vals - mean) ** 3))
        m4 = float(np.mean((vals - mean) ** 4))
        skew = m3 / m2**1.5
        kurt_raw = m4 / m2**2

    hurst: float | None
    if n < 20:
        hurst = None
        flags.append("hurst_series_too_short")
    else:
        hurst = _rescaled_range_exponent(vals)
        if hurst is None:
            flags.append("hurst_degenerate")
        elif not 0.0 < hurst < 1.0:
            # the raw slope can leave (0,1) for strongly integrated series
            hurst = min(max(hurst, 1e-6), 1.0 - 1e-6)
            flags.append("hurst_clamped")

    return DiagnosticsReport(
        minimum=float(qs[0]),
        q1=float(qs[1]),
        median=float(qs[2]),
        mean=mean,
        q3=float(qs[3]),
        maximum=float(qs[4]),
        cov=100.0 * sd / mean,
        entropy=shannon_entropy(vals, bins),
        skewness=skew,
        kurtosis=kurt_raw,
        excess_kurtosis=kurt_raw - 3.0 if m2 > 0.0 else 0.0,
        hurst=hurst,
        flags=tuple(flags),
    )


def shannon_entropy(values: np.ndarray, bins: int) -> float:
    """Plug-in entropy (nats) of the equal-width histogram over [min, max]."""
    counts, _ = np.histogram(values, bins=bins)
    p = counts[counts > 0] / values.size
    return float(-np.sum(p * np.log(p)))


def _rescaled_range_exponent(vals: np.ndarray) -> float | None:
    """R/S slope over dyadic block sizes 8..n//2; None when degenerate."""
    n = vals.size
    sizes = []
    size = 8
    while size <= n // 2:
        sizes.append(size)
        size *= 2
    if len(sizes) < 2:
        return None

    log_size = []
    log_rs = []
    for m in sizes:
        ratios = []
        for k in range(n // m):
            block = vals[k * m : (k + 1) * m]
            dev = block - block.mean()
            walk = np.cumsum(dev)
            spread = float(walk.max() - walk.min())
            scale = float(block.std())
            if scale > 0.0 and spread > 0.0:
                ratios.append(spread / scale)
        if ratios:
            log_size.append(math.log(m))
            log_rs.append(math.log(float(np.mean(ratios))))
    if len(log_rs) < 2:
        return None
    slope = np.polyfit(log_size, log_rs, 1)[0]
    return float(slope)

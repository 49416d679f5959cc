"""Subcommand front end: ingest -> screen -> fit -> forecast -> evaluate -> irf.

Configuration is a flat ``key = value`` text file (dotted keys namespace the
module options); command-line flags override file values.  Every artifact
embeds a schema version, the resolved configuration echo, and the seed, so
rerunning an echoed configuration reproduces the run bit for bit.  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, localproj, sampler, screening, timeseries
from .spikeslab import ConditioningError
from .statespace import Autoregressive, NumericError

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    pass


DATA_ERRORS = (
    timeseries.SchemaError,
    timeseries.CellError,
    timeseries.AlignmentError,
    timeseries.TransformDomainError,
    FileNotFoundError,
)
NUMERIC_ERRORS = (
    NumericError,
    ConditioningError,
    sampler.StationarityError,
    sampler.DivergenceError,
    np.linalg.LinAlgError,
)


def parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


class RunConfig:
    """Resolved flat configuration with typed accessors."""

    def __init__(self, values: dict[str, str]):
        self.values = dict(values)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.values or self.values[key] == "":
            raise ConfigError(f"missing required config key {key!r}")
        return self.values[key]

    def get_int(self, key: str, default: int | None = None) -> int | None:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {raw!r}") from None

    def get_float(self, key: str, default: float | None = None) -> float | None:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {raw!r}") from None

    def echo(self) -> dict[str, str]:
        return dict(sorted(self.values.items()))


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, str] = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    overrides = {
        "data": getattr(args, "data", None),
        "target": getattr(args, "target", None),
        "date_column": getattr(args, "date_column", None),
        "preset": getattr(args, "preset", None),
        "horizon": getattr(args, "horizon", None),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "out": getattr(args, "out", None),
        "train_end": getattr(args, "train_end", None),
        "screen_report": getattr(args, "screen_report", None),
        "mcb_errors": getattr(args, "mcb_errors", None),
        "forecast_json": getattr(args, "forecast_json", None),
        "shocks": getattr(args, "shocks", None),
        "draws_csv": "1" if getattr(args, "draws_csv", False) else None,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = str(value)
    return RunConfig(values)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _artifact(cfg: RunConfig, body: dict) -> dict:
    payload = {"schema_version": SCHEMA_VERSION, "config": cfg.echo()}
    seed = cfg.get("seed")
    if seed is not None:
        payload["seed"] = int(seed)
    payload.update(body)
    return payload


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_series(cfg: RunConfig) -> dict[str, timeseries.TimeSeries]:
    data_path = cfg.require("data")
    if not Path(data_path).exists():
        raise FileNotFoundError(f"data file not found: {data_path}")
    return timeseries.load_csv(data_path, date_column=cfg.get("date_column"))


def _apply_transforms(cfg: RunConfig, table: dict) -> dict:
    out = {}
    for name, series in table.items():
        spec = cfg.get(f"transform.{name}", "identity")
        try:
            transform = timeseries.Transform.parse(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        out[name] = timeseries.apply_transform(series, transform)
    return out


def _window(series: timeseries.TimeSeries, cfg: RunConfig,
            end_key: str = "train_end") -> timeseries.TimeSeries:
    end = cfg.get(end_key)
    if end is None:
        return series
    return series.window(end=timeseries.Month.parse(end))


def _predictor_names(cfg: RunConfig, table: dict, target: str) -> list[str]:
    explicit = cfg.get("predictors")
    if explicit:
        names = [n.strip() for n in explicit.split(",") if n.strip()]
        missing = [n for n in names if n not in table]
        if missing:
            raise ConfigError(f"predictors not in the data: {missing}")
        return names
    report_path = cfg.get("screen_report")
    if report_path:
        report = json.loads(Path(report_path).read_text(encoding="utf-8"))
        return [n for n in report["retained"] if n in table]
    return [n for n in table if n != target]


def _components(cfg: RunConfig, scale: float):
    preset = cfg.get("preset")
    seasonal_period = cfg.get_int("seasonal_period", 12)
    ar_order = cfg.get_int("ar_order", 1)
    if preset:
        try:
            return sampler.preset_components(preset, scale,
                                             seasonal_period=seasonal_period,
                                             ar_order=ar_order)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    names = cfg.get("components", "level")
    from .statespace import LocalLevel, LocalLinearTrend, Seasonal

    v = 0.1 * scale if scale > 0 else 1.0
    catalog = {
        "level": lambda: LocalLevel(v),
        "trend": lambda: LocalLinearTrend(v, 0.1 * v),
        "ar": lambda: Autoregressive((0.0,) * ar_order, v),
        "seasonal": lambda: Seasonal(seasonal_period, v),
    }
    comps = []
    for token in names.split(","):
        token = token.strip()
        if token not in catalog:
            raise ConfigError(f"unknown component {token!r}; choose from {sorted(catalog)}")
        comps.append(catalog[token]())
    return comps


def _mcmc_config(cfg: RunConfig) -> sampler.McmcConfig:
    if cfg.get("seed") is None:
        raise ConfigError("a seed is required for fit/forecast runs")
    return sampler.McmcConfig(
        iterations=cfg.get_int("mcmc.iterations", 2000),
        burn_in=cfg.get_int("mcmc.burn_in", 500),
        seed=cfg.get_int("seed"),
        chains=cfg.get_int("mcmc.chains", 2),
    )


def _prior_config(cfg: RunConfig) -> sampler.RegressionPriorConfig:
    return sampler.RegressionPriorConfig(
        expected_size=cfg.get_float("prior.expected_size", 1.0),
        nu=cfg.get_float("prior.nu"),
        expected_r2=cfg.get_float("prior.expected_r2", 0.5),
        kappa=cfg.get_float("prior.kappa", 1.0),
        omega=cfg.get_float("prior.omega", 0.5),
    )


def _screen_config(cfg: RunConfig) -> screening.ScreenConfig:
    retention = cfg.get("screen.retention", "any")
    if retention.isdigit():
        retention = int(retention)
    return screening.ScreenConfig(
        te=screening.TeConfig(
            lag=cfg.get_int("screen.te.lag", 1),
            bins=cfg.get_int("screen.te.bins", 3),
            shuffles=cfg.get_int("screen.te.shuffles", 200),
            alpha=cfg.get_float("screen.te.alpha", 0.05),
        ),
        granger=screening.GrangerConfig(
            max_lag=cfg.get_int("screen.granger.max_lag", 12),
            alpha=cfg.get_float("screen.granger.alpha", 0.05),
            lag=cfg.get_int("screen.granger.lag"),
        ),
        ccf=screening.CcfConfig(
            max_lag=cfg.get_int("screen.ccf.max_lag", 12),
            alpha=cfg.get_float("screen.ccf.alpha", 0.05),
        ),
        wavelet=screening.WaveletConfig(
            omega0=cfg.get_float("screen.wavelet.omega0", 6.0),
            scales_per_octave=cfg.get_int("screen.wavelet.scales_per_octave", 8),
            octaves=cfg.get_int("screen.wavelet.octaves"),
            alpha=cfg.get_float("screen.wavelet.alpha", 0.05),
            surrogates=cfg.get_int("screen.wavelet.surrogates", 100),
        ),
        retention=retention,
        seed=cfg.get_int("seed", 0),
        threads=cfg.get_int("threads", 1),
    )


def _aligned_design(cfg: RunConfig):
    table = _apply_transforms(cfg, _load_series(cfg))
    target_name = cfg.require("target")
    if target_name not in table:
        raise ConfigError(f"target {target_name!r} not found in the data")
    target = _window(table[target_name], cfg)
    names = _predictor_names(cfg, table, target_name)
    predictors = [_window(table[n], cfg) for n in names]
    return timeseries.align(target, predictors), target


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(cfg: RunConfig) -> int:
    matrix, _ = _aligned_design(cfg)
    out = _out_dir(cfg)
    lines = ["date," + matrix.target_name + "".join(f",{c}" for c in matrix.column_names)]
    for i, month in enumerate(matrix.months):
        cells = [str(month), repr(matrix.target[i])]
        cells += [repr(v) for v in matrix.values[i]]
        lines.append(",".join(cells))
    (out / "aligned.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "ingest.json", _artifact(cfg, {
        "rows": matrix.n_rows,
        "columns": list(matrix.column_names),
        "dropped_constant": list(matrix.dropped_constant),
        "first_month": str(matrix.months[0]),
        "last_month": str(matrix.months[-1]),
    }))
    print(f"ingest: {matrix.n_rows} rows, {matrix.n_columns} predictors -> {out}")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig) -> int:
    table = _apply_transforms(cfg, _load_series(cfg))
    target_name = cfg.require("target")
    if target_name not in table:
        raise ConfigError(f"target {target_name!r} not found in the data")
    series = _window(table[target_name], cfg)
    bins = cfg.get_int("diagnostics.bins")
    report = timeseries.diagnostics(series, bins=bins)
    out = _out_dir(cfg)
    _write_json(out / "diagnose.json", _artifact(cfg, {
        "series": target_name,
        "n": len(series),
        "first_month": str(series.start),
        "last_month": str(series.end),
        "report": report.as_dict(),
    }))
    for key, value in report.as_dict().items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_screen(cfg: RunConfig) -> int:
    matrix, _ = _aligned_design(cfg)
    report = screening.screen_all(matrix, cfg=_screen_config(cfg))
    out = _out_dir(cfg)
    (out / "screen.csv").write_text(report.to_csv_text(), encoding="utf-8")
    _write_json(out / "screen.json", _artifact(cfg, report.as_dict()))
    print(f"screen: retained {len(report.retained)} of {len(report.rows)} predictors")
    return EXIT_OK


def _fit_draws(cfg: RunConfig):
    matrix, target = _aligned_design(cfg)
    y = matrix.target
    X = matrix if matrix.n_columns else None
    scale = float(np.var(y, ddof=1)) if y.size > 1 else 1.0
    comps = _components(cfg, scale)
    prior = None
    if X is not None:
        prior = _prior_config(cfg)
        # the expected model size cannot reach the number of candidates
        cap = 0.95 * matrix.n_columns
        if prior.expected_size >= cap:
            prior = sampler.RegressionPriorConfig(
                expected_size=cap, nu=prior.nu, expected_r2=prior.expected_r2,
                kappa=prior.kappa, omega=prior.omega,
            )
    draws = sampler.fit(comps, y, X=X, regression_prior=prior,
                        mcmc=_mcmc_config(cfg))
    return draws, matrix, target


def cmd_fit(cfg: RunConfig) -> int:
    draws, matrix, _ = _fit_draws(cfg)
    out = _out_dir(cfg)
    _write_json(out / "fit.json", _artifact(cfg, {
        "target": matrix.target_name,
        "rows": matrix.n_rows,
        "summary": draws.summary(),
    }))
    if cfg.get("draws_csv"):
        header = ["sigma2_eps"] + [f"beta.{n}" for n in draws.predictor_names]
        rows = [",".join(header)]
        for d in range(draws.n_draws):
            cells = [repr(float(draws.sigma2_eps[d]))]
            cells += [repr(float(b)) for b in draws.beta[d]]
            rows.append(",".join(cells))
        (out / "draws.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"fit: {draws.n_draws} retained draws -> {out}")
    return EXIT_OK


def cmd_forecast(cfg: RunConfig) -> int:
    horizon = cfg.get_int("horizon")
    if horizon is None or horizon <= 0:
        raise ConfigError("a positive horizon is required to forecast")
    draws, matrix, _ = _fit_draws(cfg)

    x_future = None
    if matrix.n_columns:
        table = _apply_transforms(cfg, _load_series(cfg))
        last_train = matrix.months[-1]
        future_months = [last_train.shift(j + 1) for j in range(horizon)]
        x_future = np.empty((horizon, matrix.n_columns))
        for j, month in enumerate(future_months):
            for k, name in enumerate(matrix.column_names):
                x_future[j, k] = table[name].value_at(month)
        if np.isnan(x_future).any():
            raise timeseries.AlignmentError(
                "predictor values are unavailable for part of the forecast window"
            )
    fc = sampler.forecast(draws, horizon, x_future=x_future,
                          level=cfg.get_float("eval.level", 0.9),
                          rng=cfg.get_int("seed"))
    out = _out_dir(cfg)
    if cfg.get("draws_csv"):
        rows = [",".join(f"h{j + 1}" for j in range(horizon))]
        for d in range(fc.draws.shape[0]):
            rows.append(",".join(repr(float(v)) for v in fc.draws[d]))
        (out / "forecast_draws.csv").write_text("\n".join(rows) + "\n",
                                                encoding="utf-8")
    last = matrix.months[-1]
    _write_json(out / "forecast.json", _artifact(cfg, {
        "target": matrix.target_name,
        "horizon": horizon,
        "level": fc.level,
        "months": [str(last.shift(j + 1)) for j in range(horizon)],
        "mean": [float(v) for v in fc.mean],
        "median": [float(v) for v in fc.median],
        "lower": [float(v) for v in fc.lower],
        "upper": [float(v) for v in fc.upper],
    }))
    print(f"forecast: {horizon} steps ahead -> {out}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    forecast_spec = cfg.get("forecast_json")
    if not forecast_spec:
        raise ConfigError("evaluate needs forecast_json pointing at forecast artifacts")
    paths = [Path(p.strip()) for p in forecast_spec.split(",") if p.strip()]

    months = None
    points: dict[str, np.ndarray] = {}
    for path in paths:
        payload = json.loads(path.read_text(encoding="utf-8"))
        these = [timeseries.Month.parse(m) for m in payload["months"]]
        if months is None:
            months = these
        elif these != months:
            raise ConfigError(f"forecast {path} covers a different window")
        name = path.stem if path.stem not in points else path.parent.name
        points[name] = np.array(payload["mean"], dtype=float)
    assert months is not None

    table = _apply_transforms(cfg, _load_series(cfg))
    target_name = cfg.require("target")
    target = table[target_name]
    actual = np.array([target.value_at(m) for m in months])
    if np.isnan(actual).any():
        raise timeseries.AlignmentError("actuals are unavailable for part of the forecast window")
    train = _window(target, cfg)

    reports = {name: evaluation.metrics(actual, point, train.values)
               for name, point in points.items()}
    curves = evaluation.murphy_scores(actual, points)
    names = list(points)
    first = names[0]
    differences = []
    for other in names[1:]:
        diff = evaluation.murphy_difference(curves[first], curves[other])
        differences.append({
            "model_a": diff.model_a, "model_b": diff.model_b,
            "diff": [float(v) for v in diff.diff],
            "lower": [float(v) for v in diff.lower],
            "upper": [float(v) for v in diff.upper],
        })

    body: dict = {
        "target": target_name,
        "horizon": len(months),
        "metrics": {name: rep.as_dict() for name, rep in reports.items()},
        "murphy": {
            "theta": [float(t) for t in curves[first].theta],
            "scores": {name: [float(s) for s in curves[name].scores] for name in names},
            "differences": differences,
        },
    }
    mcb_path = cfg.get("mcb_errors")
    if mcb_path:
        header, matrix = _read_matrix_csv(mcb_path)
        result = evaluation.mcb(matrix, models=header)
        body["mcb"] = result.as_dict()

    out = _out_dir(cfg)
    _write_json(out / "evaluate.json", _artifact(cfg, body))
    metric_names = ["rmse", "mae", "mape", "smape", "mase"]
    metric_lines = ["metric," + ",".join(names)]
    for metric in metric_names:
        cells = [str(reports[n].as_dict()[metric]) for n in names]
        metric_lines.append(metric + "," + ",".join(cells))
    (out / "metrics.csv").write_text("\n".join(metric_lines) + "\n", encoding="utf-8")
    lead = reports[first]
    print(f"evaluate: {first} rmse={lead.rmse:.4f} mape={lead.mape:.4f} -> {out}")
    return EXIT_OK


def _read_matrix_csv(path: str):
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = tuple(h.strip() for h in lines[0].split(","))
    rows = [[float(c) for c in line.split(",")] for line in lines[1:]]
    return header, np.asarray(rows)


def cmd_irf(cfg: RunConfig) -> int:
    table = _apply_transforms(cfg, _load_series(cfg))
    target_name = cfg.require("target")
    shodef = cfg.get("shocks") or cfg.get("lp.shocks")
    if not shodef:
        raise ConfigError("irf needs shocks: a comma-separated list of columns")
    shock_names = [s.strip() for s in shodef.split(",") if s.strip()]
    missing = [s for s in shock_names if s not in table]
    if missing:
        raise ConfigError(f"shock columns not in the data: {missing}")

    lp_cfg = localproj.LpConfig(
        horizons=cfg.get_int("lp.horizons", 24),
        max_lags=cfg.get_int("lp.max_lags", 12),
        lags=cfg.get_int("lp.lags"),
        trend=cfg.get("lp.trend", "linear"),
        ci_multiplier=cfg.get_float("lp.ci_multiplier", 1.96),
    )
    out = _out_dir(cfg)
    panels = []
    for name in shock_names:
        matrix = timeseries.align(table[target_name], [table[name]])
        irf = localproj.lp_irf(matrix.target, matrix.values[:, 0], cfg=lp_cfg,
                               shock_name=name, response_name=target_name)
        panels.append(irf.as_dict())
        lines = ["h,point,se,lo,hi"]
        for i, h in enumerate(irf.horizons):
            lines.append(f"{int(h)},{irf.point[i]!r},{irf.se[i]!r},"
                         f"{irf.lower[i]!r},{irf.upper[i]!r}")
        (out / f"irf_{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "irf.json", _artifact(cfg, {"panels": panels}))
    print(f"irf: {len(panels)} shock panels -> {out}")
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "diagnose": cmd_diagnose,
    "screen": cmd_screen,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "irf": cmd_irf,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bstskit",
        description="Structural time-series forecasting with predictor selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--data", help="input CSV (header row, monthly dates)")
        p.add_argument("--target", help="target column name")
        p.add_argument("--date-column", dest="date_column")
        p.add_argument("--preset", help="component preset: h1 h3 h6 h12 h24")
        p.add_argument("--horizon", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out", help="output directory (default ./out)")
        p.add_argument("--train-end", dest="train_end",
                       help="last training month, YYYY-MM")
        if name == "fit":
            p.add_argument("--screen-report", dest="screen_report",
                           help="screen.json whose retained set becomes the design")
            p.add_argument("--draws-csv", dest="draws_csv", action="store_true")
        if name == "forecast":
            p.add_argument("--screen-report", dest="screen_report")
            p.add_argument("--draws-csv", dest="draws_csv", action="store_true")
        if name == "evaluate":
            p.add_argument("--forecast-json", dest="forecast_json",
                           help="forecast artifact(s), comma separated")
            p.add_argument("--mcb-errors", dest="mcb_errors",
                           help="CSV of datasets x models error values")
        if name == "irf":
            p.add_argument("--shocks", help="comma-separated shock columns")
    return parser


def _fail(code: int, exc: Exception) -> int:
    message = f"{type(exc).__name__}: {exc}"
    print(message, file=sys.stderr)
    print(json.dumps({
        "schema_version": SCHEMA_VERSION,
        "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code},
    }, sort_keys=True))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError,) as exc:
        return _fail(EXIT_CONFIG, exc)
    except DATA_ERRORS as exc:
        return _fail(EXIT_DATA, exc)
    except NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, exc)
    except ValueError as exc:
        return _fail(EXIT_DATA, exc)


if __name__ == "__main__":
    sys.exit(main())

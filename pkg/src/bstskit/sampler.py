"""Three-block Gibbs sampler for structural models with optional regression.

Each iteration: (1) draw the state path with the simulation smoother given
current component parameters and the regression offset; (2) draw component
variances (and AR coefficients, with stationarity rejection) from their
conjugate conditionals given the states; (3) remove the state contribution
from the observations and update (gamma, beta, sigma2) with the collapsed
spike-and-slab step, or draw sigma2 alone when there are no predictors.

Component variances get inverse-Gamma(a0 + T'/2, b0 + SSR/2) updates with a
weakly informative default (a0 = 0.01, b0 = 0.01 * var(y)), overridable.
Point forecasts for error metrics use the posterior-predictive mean; the
median and a central interval are reported alongside.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .spikeslab import (SpikeSlabState, build_prior, draw_beta_sigma,
                        gibbs_sweep_gamma)
from .statespace import (Autoregressive, Component, LocalLevel,
                         LocalLinearTrend, Seasonal, assemble, kalman_filter,
                         simulate_states)
from .timeseries import DesignMatrix, TimeSeries

logger = logging.getLogger(__name__)


class StationarityError(RuntimeError):
    """AR coefficient draws kept landing outside the stationary region."""


class DivergenceError(RuntimeError):
    """A non-finite draw appeared; carries the iteration index."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 2000
    burn_in: int = 500
    seed: int = 0
    chains: int = 2
    chain_seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.chain_seeds is not None and len(self.chain_seeds) != self.chains:
            raise ValueError("chain_seeds must list one seed per chain")

    def seeds(self) -> tuple[int, ...]:
        if self.chain_seeds is not None:
            return tuple(int(s) for s in self.chain_seeds)
        return tuple(int(self.seed) + c for c in range(self.chains))


@dataclass(frozen=True)
class VariancePrior:
    """Inverse-Gamma hyperprior; b0 = scale_fraction * var(y) unless fixed."""

    shape: float = 0.01
    scale_fraction: float = 0.01
    scale: float | None = None

    def rate(self, sample_variance: float) -> float:
        if self.scale is not None:
            return self.scale
        return self.scale_fraction * sample_variance


@dataclass(frozen=True)
class RegressionPriorConfig:
    expected_size: float = 1.0
    nu: float | None = None
    expected_r2: float = 0.5
    kappa: float = 1.0
    omega: float = 0.5

    def build(self, X) -> SpikeSlabPrior:
        return build_prior(X, expected_size=self.expected_size, nu=self.nu,
                           expected_r2=self.expected_r2, kappa=self.kappa,
                           omega=self.omega)


@dataclass
class PosteriorDraws:
    """Retained draws, merged over chains (dimension D)."""

    components: tuple[Component, ...]
    predictor_names: tuple[str, ...]
    alpha: np.ndarray                    # (D, n, m)
    component_variances: tuple[np.ndarray, ...]   # per component (D, n_var)
    component_coefs: tuple[np.ndarray | None, ...]  # per component (D, p) or None
    beta: np.ndarray                     # (D, K)
    sigma2_eps: np.ndarray               # (D,)
    gamma: np.ndarray                    # (D, K) bool
    loglik: np.ndarray                   # (D,)
    chain_index: np.ndarray              # (D,)
    config: McmcConfig = field(repr=False, default=None)

    @property
    def n_draws(self) -> int:
        return self.sigma2_eps.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.beta.shape[1]

    def components_for_draw(self, d: int) -> list[Component]:
        comps = []
        for i, comp in enumerate(self.components):
            coefs = None
            if self.component_coefs[i] is not None:
                coefs = self.component_coefs[i][d]
            comps.append(comp.replace_params(self.component_variances[i][d], coefs))
        return comps

    def summary(self) -> dict:
        """Posterior medians and inclusion frequencies, JSON-friendly."""
        out: dict = {
            "n_draws": int(self.n_draws),
            "sigma2_eps": _quantile_summary(self.sigma2_eps),
            "components": [],
        }
        for i, comp in enumerate(self.components):
            entry = {"kind": comp.kind,
                     "variances": [_quantile_summary(col) for col in self.component_variances[i].T]}
            if self.component_coefs[i] is not None:
                entry["coefficients"] = [_quantile_summary(col) for col in self.component_coefs[i].T]
            out["components"].append(entry)
        if self.n_predictors:
            out["inclusion"] = [
                {"name": name, "probability": prob}
                for name, prob in inclusion_probabilities(self)
            ]
        return out


def _quantile_summary(draws: np.ndarray) -> dict:
    qs = np.quantile(draws, [0.05, 0.5, 0.95])
    return {"q05": float(qs[0]), "median": float(qs[1]), "q95": float(qs[2]),
            "mean": float(np.mean(draws))}


@dataclass(frozen=True)
class ForecastResult:
    horizon: int
    level: float
    mean: np.ndarray     # (h,)
    median: np.ndarray   # (h,)
    lower: np.ndarray    # (h,)
    upper: np.ndarray    # (h,)
    draws: np.ndarray    # (D, h)


def preset_components(name: str, scale: float = 1.0, seasonal_period: int = 12,
                      ar_order: int = 1) -> list[Component]:
    """Named component bundles for the five standard horizons.

    ``scale`` should be the sample variance of the target; it sets the
    chain's initial variances, not the priors.
    """
    v = 0.1 * scale if scale > 0 else 1.0
    level = LocalLevel(v)
    trend = LocalLinearTrend(v, 0.1 * v)
    ar = Autoregressive((0.0,) * ar_order, v)
    seasonal = Seasonal(seasonal_period, v)
    presets = {
        "h1": [level, ar, seasonal],
        "h3": [level, ar, seasonal],
        "h6": [trend, ar, seasonal],
        "h12": [trend],
        "h24": [level, trend, ar, seasonal],
    }
    if name not in presets:
        raise ValueError(f"unknown preset {name!r}; choose one of {sorted(presets)}")
    return presets[name]


_SHOCK_ROWS = {"level": (0,), "trend": (0, 1), "ar": (0,), "seasonal": (0,)}


def draw_component_params(components, alpha: np.ndarray, rng,
                          a0: float = 0.01, b0: float = 0.01,
                          max_rejects: int = 1000) -> list[Component]:
    """Draw component parameters given a sampled state path.

    Variances come from inverse-Gamma(a0 + T'/2, b0 + SSR/2) with
    component-specific residuals; AR coefficients come from their Gaussian
    conditional (flat prior) and are redrawn until the companion matrix is
    stable.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[1] != sum(c.state_dim for c in components):
        raise ValueError("state path width does not match the component layout")

    updated: list[Component] = []
    offset = 0
    for comp in components:
        block = alpha[:, offset : offset + comp.state_dim]
        offset += comp.state_dim
        if comp.kind == "ar":
            updated.append(_draw_ar(comp, block, rng, a0, b0, max_rejects))
            continue
        _, Tc, _, _ = comp.matrices()
        resid = block[1:] - block[:-1] @ Tc.T
        variances = []
        for row in _SHOCK_ROWS[comp.kind]:
            variances.append(_draw_inverse_gamma(rng, a0, b0, resid[:, row]))
        updated.append(comp.replace_params(variances))
    return updated


def _draw_inverse_gamma(rng, a0: float, b0: float, resid: np.ndarray) -> float:
    shape = a0 + resid.size / 2.0
    rate = b0 + float(resid @ resid) / 2.0
    return 1.0 / rng.gamma(shape, 1.0 / rate)


def _draw_ar(comp: Autoregressive, block: np.ndarray, rng,
             a0: float, b0: float, max_rejects: int) -> Autoregressive:
    p = comp.order
    lags = block[:-1, :p]
    target = block[1:, 0]
    gram = lags.T @ lags
    try:
        mean = np.linalg.solve(gram, lags.T @ target)
        cov_chol = np.linalg.cholesky(np.linalg.inv(gram))
    except np.linalg.LinAlgError as exc:
        raise StationarityError(f"AR conditional is singular: {exc}") from exc

    sigma = np.sqrt(comp.sigma2)
    for _ in range(max_rejects):
        phi = mean + sigma * (cov_chol @ rng.standard_normal(p))
        candidate = Autoregressive(tuple(phi), comp.sigma2)
        if candidate.is_stationary():
            resid = target - lags @ phi
            sigma2 = _draw_inverse_gamma(rng, a0, b0, resid)
            return Autoregressive(tuple(phi), sigma2)
    raise StationarityError(
        f"no stationary AR({p}) draw in {max_rejects} attempts"
    )


def fit(components, y, X: DesignMatrix | None = None,
        regression_prior: RegressionPriorConfig | None = None,
        mcmc: McmcConfig | None = None,
        variance_prior: VariancePrior | None = None) -> PosteriorDraws:
    """Run the three-block sampler and return the retained draws.

    ``y`` is a :class:`TimeSeries` (missing entries allowed when ``X`` is
    None) or a plain array; ``X`` must be row-aligned with ``y`` when given.
    The passed component parameter values initialize each chain.
    """
    mcmc = mcmc or McmcConfig()
    variance_prior = variance_prior or VariancePrior()
    y_vals = np.asarray(y.values if isinstance(y, TimeSeries) else y, dtype=float)
    observed = ~np.isnan(y_vals)
    if not observed.any():
        raise ValueError("no observed values in y")
    components = list(components)

    if X is not None:
        x_vals = X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
        if x_vals.shape[0] != y_vals.shape[0]:
            raise ValueError("X and y must have the same number of rows")
        names = (X.column_names if isinstance(X, DesignMatrix)
                 else tuple(f"x{i}" for i in range(x_vals.shape[1])))
        prior = (regression_prior or RegressionPriorConfig()).build(
            X if isinstance(X, DesignMatrix) else x_vals
        )
    else:
        x_vals = np.zeros((y_vals.shape[0], 0))
        names = ()
        prior = None

    if not components and x_vals.shape[1] == 0:
        raise ValueError("empty model: no components and no predictors")

    var_y = float(np.var(y_vals[observed], ddof=1)) if observed.sum() > 1 else 1.0
    a0 = variance_prior.shape
    b0 = variance_prior.rate(var_y)

    chains = [
        _run_chain(components, y_vals, observed, x_vals, prior, mcmc, seed,
                   a0, b0, var_y)
        for seed in mcmc.seeds()
    ]
    return _merge_chains(chains, components, names, mcmc)


def _run_chain(components, y_vals, observed, x_vals, prior, mcmc, seed, a0, b0, var_y):
    rng = np.random.default_rng(seed)
    n = y_vals.shape[0]
    K = x_vals.shape[1]
    comps = list(components)
    sigma2_eps = max(0.5 * var_y, 1e-8)
    beta = np.zeros(K)
    gamma = np.zeros(K, dtype=bool)
    gram = x_vals.T @ x_vals if K else None

    kept = mcmc.iterations - mcmc.burn_in
    m = sum(c.state_dim for c in comps)
    rec_alpha = np.empty((kept, n, m))
    rec_var = [np.empty((kept, len(c.variances()))) for c in comps]
    rec_coef = [np.empty((kept, c.order)) if c.kind == "ar" else None for c in comps]
    rec_beta = np.empty((kept, K))
    rec_sigma2 = np.empty(kept)
    rec_gamma = np.empty((kept, K), dtype=bool)
    rec_loglik = np.empty(kept)

    for it in range(mcmc.iterations):
        offset = x_vals @ beta if K else 0.0
        y_eff = y_vals - offset

        if comps:
            model = assemble(comps, n_predictors=K, sigma2_eps=sigma2_eps)
            loglik = kalman_filter(model, y_eff).loglik
            alpha = simulate_states(model, y_eff, rng).states
            comps = draw_component_params(comps, alpha, rng, a0=a0, b0=b0)
            signal = alpha @ model.Z
        else:
            loglik = float(np.sum(
                -0.5 * (np.log(2 * np.pi * sigma2_eps)
                        + (y_eff[observed] ** 2) / sigma2_eps)))
            alpha = np.zeros((n, 0))
            signal = np.zeros(n)

        y_star = y_vals - signal
        if K:
            x_obs = x_vals if observed.all() else x_vals[observed]
            gram_obs = gram if observed.all() else None
            gamma = gibbs_sweep_gamma(
                prior, x_obs, y_star[observed],
                SpikeSlabState(gamma, np.zeros(K), sigma2_eps), rng, gram=gram_obs,
            )
            beta, sigma2_eps = draw_beta_sigma(
                prior, x_obs, y_star[observed], gamma, rng, gram=gram_obs
            )
        else:
            resid = y_star[observed]
            sigma2_eps = _draw_inverse_gamma(rng, a0, b0, resid)

        if not (np.isfinite(sigma2_eps) and np.isfinite(beta).all()
                and np.isfinite(alpha).all() and np.isfinite(loglik)):
            raise DivergenceError(f"non-finite draw at iteration {it}", iteration=it)

        if it >= mcmc.burn_in:
            r = it - mcmc.burn_in
            rec_alpha[r] = alpha
            for i, comp in enumerate(comps):
                rec_var[i][r] = comp.variances()
                if rec_coef[i] is not None:
                    rec_coef[i][r] = comp.coefficients
            rec_beta[r] = beta
            rec_sigma2[r] = sigma2_eps
            rec_gamma[r] = gamma
            rec_loglik[r] = loglik

    return rec_alpha, rec_var, rec_coef, rec_beta, rec_sigma2, rec_gamma, rec_loglik


def _merge_chains(chains, components, names, mcmc) -> PosteriorDraws:
    alpha = np.concatenate([c[0] for c in chains])
    n_comp = len(components)
    variances = tuple(np.concatenate([c[1][i] for c in chains]) for i in range(n_comp))
    coefs = tuple(
        np.concatenate([c[2][i] for c in chains]) if chains[0][2][i] is not None else None
        for i in range(n_comp)
    )
    kept = mcmc.iterations - mcmc.burn_in
    chain_index = np.repeat(np.arange(len(chains)), kept)
    return PosteriorDraws(
        components=tuple(components),
        predictor_names=tuple(names),
        alpha=alpha,
        component_variances=variances,
        component_coefs=coefs,
        beta=np.concatenate([c[3] for c in chains]),
        sigma2_eps=np.concatenate([c[4] for c in chains]),
        gamma=np.concatenate([c[5] for c in chains]),
        loglik=np.concatenate([c[6] for c in chains]),
        chain_index=chain_index,
        config=mcmc,
    )


def forecast(draws: PosteriorDraws, horizon: int, x_future: np.ndarray | None = None,
             level: float = 0.9, rng=0) -> ForecastResult:
    """Posterior-predictive paths ``horizon`` steps past the sample end.

    Every retained draw contributes one trajectory: the transition is
    iterated from that draw's final state with fresh state and observation
    noise, plus the regression offset when the fit used predictors (then
    ``x_future`` must supply ``horizon`` rows; coefficients excluded by the
    draw's gamma ignore their columns).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if not 0.0 < level < 1.0:
        raise ValueError("interval level must lie in (0, 1)")
    K = draws.n_predictors
    if K:
        if x_future is None:
            raise ValueError("x_future is required because the fit used predictors")
        x_future = np.asarray(x_future, dtype=float)
        if x_future.shape != (horizon, K):
            raise ValueError(f"x_future must have shape ({horizon}, {K})")
        if not np.isfinite(x_future).all():
            raise ValueError("x_future must be finite")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng

    D = draws.n_draws
    paths = np.empty((D, horizon))
    has_state = draws.alpha.shape[2] > 0
    for d in range(D):
        offsets = x_future @ draws.beta[d] if K else np.zeros(horizon)
        sd_eps = np.sqrt(draws.sigma2_eps[d])
        if has_state:
            model = assemble(draws.components_for_draw(d), n_predictors=K,
                             sigma2_eps=draws.sigma2_eps[d])
            state = draws.alpha[d, -1].copy()
            q_sd = np.sqrt(model.Q_diag)
            for j in range(horizon):
                state = model.T @ state + model.R @ (q_sd * rng.standard_normal(model.shock_dim))
                paths[d, j] = model.Z @ state + offsets[j] + sd_eps * rng.standard_normal()
        else:
            paths[d] = offsets + sd_eps * rng.standard_normal(horizon)

    half = (1.0 - level) / 2.0
    return ForecastResult(
        horizon=horizon,
        level=level,
        mean=paths.mean(axis=0),
        median=np.quantile(paths, 0.5, axis=0),
        lower=np.quantile(paths, half, axis=0),
        upper=np.quantile(paths, 1.0 - half, axis=0),
        draws=paths,
    )


def inclusion_probabilities(draws: PosteriorDraws) -> list[tuple[str, float]]:
    """Fraction of retained draws including each predictor, sorted descending."""
    if draws.n_predictors == 0:
        raise ValueError("the fit used no predictors")
    probs = draws.gamma.mean(axis=0)
    order = sorted(zip(draws.predictor_names, probs), key=lambda kv: (-kv[1], kv[0]))
    return [(name, float(p)) for name, p in order]

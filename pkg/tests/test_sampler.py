import itertools
import math

import numpy as np
import pytest

from bstskit.sampler import (ForecastResult, McmcConfig, PosteriorDraws,
                             RegressionPriorConfig, VariancePrior,
                             draw_component_params, fit, forecast,
                             inclusion_probabilities, preset_components)
from bstskit.statespace import (Autoregressive, LocalLevel, LocalLinearTrend,
                                Seasonal, assemble, kalman_filter)


def simulate_local_level(rng, n, sigma_u, sigma_eps, level0=0.0):
    level = level0 + np.cumsum(rng.normal(0.0, sigma_u, size=n))
    return level + rng.normal(0.0, sigma_eps, size=n), level


def small_mcmc(seed, iterations=600, burn_in=150):
    return McmcConfig(iterations=iterations, burn_in=burn_in, seed=seed, chains=1)


class TestDrawComponentParams:
    def test_zero_increments_concentrate_near_prior_scale(self):
        alpha = np.full((500, 1), 3.0)
        rng = np.random.default_rng(0)
        comps = draw_component_params([LocalLevel(1.0)], alpha, rng,
                                      a0=0.01, b0=0.01)
        assert comps[0].sigma2 < 1e-3

    def test_level_variance_conjugate_recovery(self):
        rng = np.random.default_rng(1)
        increments = rng.normal(0.0, 0.5, size=499)
        alpha = np.concatenate([[0.0], np.cumsum(increments)])[:, None]
        draws = [
            draw_component_params([LocalLevel(1.0)], alpha, rng,
                                  a0=0.01, b0=0.01)[0].sigma2
            for _ in range(200)
        ]
        assert 0.2 < np.mean(draws) < 0.3

    def test_ar_coefficient_recovery_matches_ols(self):
        rng = np.random.default_rng(2)
        x = np.zeros(800)
        for t in range(1, 800):
            x[t] = 0.8 * x[t - 1] + rng.normal(0.0, 1.0)
        alpha = x[:, None]
        phis = [
            draw_component_params([Autoregressive((0.0,), 1.0)], alpha, rng)[0]
            .coefficients[0]
            for _ in range(200)
        ]
        lags, target = x[:-1], x[1:]
        ols = float(lags @ target / (lags @ lags))
        assert 0.7 < np.mean(phis) < 0.9
        assert np.mean(phis) == pytest.approx(ols, abs=0.05)

    def test_trend_and_seasonal_residual_shapes(self):
        rng = np.random.default_rng(3)
        comps = [LocalLinearTrend(0.5, 0.2), Seasonal(4, 0.3)]
        model = assemble(comps, sigma2_eps=1.0)
        # simulate a state path with the model's own transition
        m = model.state_dim
        states = np.zeros((300, m))
        for t in range(1, 300):
            shock = np.sqrt(model.Q_diag) * rng.standard_normal(model.shock_dim)
            states[t] = model.T @ states[t - 1] + model.R @ shock
        new = draw_component_params(comps, states, rng)
        assert 0.2 < new[0].sigma2_level < 1.2
        assert 0.05 < new[0].sigma2_slope < 0.6
        assert 0.1 < new[1].sigma2 < 0.8

    def test_persistent_rejection_raises(self):
        from bstskit.sampler import StationarityError

        # an explosive path makes stationary draws essentially impossible
        alpha = (1.3 ** np.arange(200))[:, None]
        with pytest.raises(StationarityError):
            draw_component_params([Autoregressive((0.0,), 1e-12)], alpha,
                                  np.random.default_rng(4), max_rejects=50)


class TestFit:
    def test_level_variance_recovered(self):
        rng = np.random.default_rng(5)
        y, _ = simulate_local_level(rng, 300, sigma_u=0.1, sigma_eps=1.0)
        draws = fit([LocalLevel(0.1)], y, mcmc=McmcConfig(
            iterations=2000, burn_in=500, seed=6, chains=1))
        median_sigma_u = float(np.median(np.sqrt(draws.component_variances[0][:, 0])))
        assert 0.05 <= median_sigma_u <= 0.2

    def test_regression_recovery(self):
        rng = np.random.default_rng(7)
        n, K = 300, 30
        X = rng.standard_normal((n, K))
        true = np.zeros(K)
        true[:3] = math.sqrt(5.0 / 3.0)
        y_reg = X @ true
        y, _ = simulate_local_level(rng, n, sigma_u=0.05, sigma_eps=1.0)
        y = y + y_reg
        draws = fit([LocalLevel(0.01)], y, X=X,
                    regression_prior=RegressionPriorConfig(expected_size=5.0),
                    mcmc=McmcConfig(iterations=1200, burn_in=300, seed=8, chains=1))
        probs = dict(inclusion_probabilities(draws))
        active = [probs[f"x{i}"] for i in range(3)]
        noise = [probs[f"x{i}"] for i in range(3, K)]
        assert min(active) > 0.5
        assert np.median(noise) < 0.2

    def test_chains_with_same_seed_are_identical(self):
        rng = np.random.default_rng(9)
        y, _ = simulate_local_level(rng, 80, sigma_u=0.3, sigma_eps=1.0)
        draws = fit([LocalLevel(0.1)], y, mcmc=McmcConfig(
            iterations=200, burn_in=50, seed=0, chains=2, chain_seeds=(11, 11)))
        kept = 150
        np.testing.assert_array_equal(draws.alpha[:kept], draws.alpha[kept:])
        np.testing.assert_array_equal(draws.sigma2_eps[:kept], draws.sigma2_eps[kept:])

    def test_beta_gamma_consistency_and_finite_loglik(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((120, 4))
        y = X[:, 0] * 2.0 + rng.standard_normal(120)
        y = y + np.cumsum(rng.normal(0, 0.1, 120))
        draws = fit([LocalLevel(0.05)], y, X=X,
                    mcmc=McmcConfig(iterations=400, burn_in=100, seed=11, chains=2))
        assert np.all(draws.beta[~draws.gamma] == 0.0)
        assert np.isfinite(draws.loglik).all()
        assert np.isfinite(draws.beta).all()

    def test_pure_regression_matches_enumeration(self):
        # no structural components: the chain reduces to collapsed SSVS,
        # so inclusion frequencies must match the enumeration oracle
        rng = np.random.default_rng(12)
        n, K = 40, 3
        X = rng.standard_normal((n, K))
        y = 1.2 * X[:, 0] + rng.standard_normal(n)
        cfg = RegressionPriorConfig(expected_size=1.5, nu=2.0)
        draws = fit([], y, X=X, regression_prior=cfg,
                    mcmc=McmcConfig(iterations=20000, burn_in=2000, seed=13, chains=1))
        probs = draws.gamma.mean(axis=0)

        prior = cfg.build(X)
        # enumeration oracle over all 8 inclusion vectors (independent route)
        def oracle_weight(g):
            idx = np.flatnonzero(g)
            lp = np.log(prior.pi[g]).sum() + np.log1p(-prior.pi[~g]).sum()
            if idx.size:
                Xg = X[:, idx]
                Og = np.linalg.inv(prior.omega_inv[np.ix_(idx, idx)])
                M = np.eye(n) + Xg @ Og @ Xg.T
            else:
                M = np.eye(n)
            sign, logdet = np.linalg.slogdet(M)
            quad = y @ np.linalg.solve(M, y)
            # fit() draws sigma2 against var(y)-scaled ss, mirror it here
            ss = prior.nu * 0.5 * float(np.var(y, ddof=1))
            return lp - 0.5 * logdet - (n + prior.nu) / 2.0 * math.log(ss + quad)

        gammas = [np.array(b, dtype=bool) for b in itertools.product([0, 1], repeat=K)]
        logs = np.array([oracle_weight(g) for g in gammas])
        w = np.exp(logs - logs.max())
        w /= w.sum()
        marginal = np.array([
            sum(wi for wi, g in zip(w, gammas) if g[k]) for k in range(K)
        ])
        np.testing.assert_allclose(probs, marginal, atol=0.02)

    def test_empty_model_rejected(self):
        with pytest.raises(ValueError, match="empty model"):
            fit([], np.array([1.0, 2.0, 3.0]))

    def test_simulation_based_calibration_rank_uniformity(self):
        # generate from the fit's own prior; posterior ranks of the true
        # level variance must be uniform across replications
        a0, b0 = 3.0, 2.0
        n, reps, bins = 60, 100, 20
        ranks = []
        for rep in range(reps):
            rng = np.random.default_rng(1000 + rep)
            sigma2_u = 1.0 / rng.gamma(a0, 1.0 / b0)
            sigma2_eps = 1.0 / rng.gamma(a0, 1.0 / b0)
            y, _ = simulate_local_level(rng, n, math.sqrt(sigma2_u),
                                        math.sqrt(sigma2_eps),
                                        level0=rng.normal(0, 10.0))
            draws = fit([LocalLevel(1.0)], y,
                        mcmc=McmcConfig(iterations=500, burn_in=120, seed=rep,
                                        chains=1),
                        variance_prior=VariancePrior(shape=a0, scale=b0))
            sample = draws.component_variances[0][:, 0]
            thin = sample[19 :: (sample.size - 19) // 19][:19]
            ranks.append(int(np.sum(thin < sigma2_u)))
        counts = np.bincount(ranks, minlength=bins)
        expected = reps / bins
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        # chi-square(19) upper 1% point
        assert chi2 < 36.19


class TestForecast:
    def test_noiseless_limit_is_flat_with_zero_width(self):
        rng = np.random.default_rng(14)
        y, _ = simulate_local_level(rng, 60, sigma_u=0.5, sigma_eps=0.5)
        base = fit([LocalLevel(0.1)], y, mcmc=small_mcmc(15))
        # freeze every draw at (almost) zero variance and the same final state
        frozen = PosteriorDraws(
            components=base.components,
            predictor_names=(),
            alpha=np.repeat(base.alpha[:1], 50, axis=0),
            component_variances=(np.full((50, 1), 1e-16),),
            component_coefs=(None,),
            beta=np.zeros((50, 0)),
            sigma2_eps=np.full(50, 1e-16),
            gamma=np.zeros((50, 0), dtype=bool),
            loglik=np.zeros(50),
            chain_index=np.zeros(50, dtype=int),
            config=base.config,
        )
        fc = forecast(frozen, horizon=6, rng=16)
        last_level = base.alpha[0, -1, 0]
        np.testing.assert_allclose(fc.mean, last_level, atol=1e-6)
        np.testing.assert_allclose(fc.upper - fc.lower, 0.0, atol=1e-6)

    def test_predictive_variance_matches_closed_form(self):
        sigma2_u, sigma2_eps = 0.3, 1.0
        rng = np.random.default_rng(17)
        y, _ = simulate_local_level(rng, 50, math.sqrt(sigma2_u), math.sqrt(sigma2_eps))
        model = assemble([LocalLevel(sigma2_u)], sigma2_eps=sigma2_eps)
        filt = kalman_filter(model, y)
        p_last = filt.filtered_cov[-1, 0, 0]

        from bstskit.statespace import simulate_states

        n_draws = 20000
        alpha = np.empty((n_draws, 50, 1))
        draw_rng = np.random.default_rng(18)
        for d in range(n_draws):
            alpha[d] = simulate_states(model, y, draw_rng).states
        draws = PosteriorDraws(
            components=(LocalLevel(sigma2_u),),
            predictor_names=(),
            alpha=alpha,
            component_variances=(np.full((n_draws, 1), sigma2_u),),
            component_coefs=(None,),
            beta=np.zeros((n_draws, 0)),
            sigma2_eps=np.full(n_draws, sigma2_eps),
            gamma=np.zeros((n_draws, 0), dtype=bool),
            loglik=np.zeros(n_draws),
            chain_index=np.zeros(n_draws, dtype=int),
            config=None,
        )
        fc = forecast(draws, horizon=3, rng=19)
        for j in range(1, 4):
            expected = p_last + j * sigma2_u + sigma2_eps
            observed = float(fc.draws[:, j - 1].var())
            assert abs(observed - expected) / expected < 0.05

    def test_interval_ordering_and_shapes(self):
        rng = np.random.default_rng(20)
        y, _ = simulate_local_level(rng, 80, 0.3, 1.0)
        draws = fit([LocalLevel(0.1)], y, mcmc=small_mcmc(21))
        fc = forecast(draws, horizon=12, rng=22)
        assert isinstance(fc, ForecastResult)
        assert fc.draws.shape == (draws.n_draws, 12)
        assert np.all(fc.lower <= fc.median) and np.all(fc.median <= fc.upper)

    def test_nonpositive_horizon_rejected(self):
        rng = np.random.default_rng(60)
        y, _ = simulate_local_level(rng, 50, 0.2, 1.0)
        draws = fit([LocalLevel(0.1)], y, mcmc=small_mcmc(61, iterations=80, burn_in=20))
        with pytest.raises(ValueError, match="horizon"):
            forecast(draws, horizon=0)

    def test_divergent_inputs_abort(self):
        from bstskit.sampler import DivergenceError

        y = np.array([1e200, -1e200] * 40)  # variance overflows to inf
        with np.errstate(all="ignore"), pytest.raises((DivergenceError, ValueError)):
            fit([LocalLevel(0.1)], y, mcmc=small_mcmc(62, iterations=40, burn_in=10))

    def test_x_future_required_and_checked(self):
        rng = np.random.default_rng(23)
        X = rng.standard_normal((90, 2))
        y = X[:, 0] + rng.standard_normal(90) + np.cumsum(rng.normal(0, 0.1, 90))
        draws = fit([LocalLevel(0.05)], y, X=X, mcmc=small_mcmc(24))
        with pytest.raises(ValueError, match="x_future"):
            forecast(draws, horizon=4)
        with pytest.raises(ValueError, match="shape"):
            forecast(draws, horizon=4, x_future=np.zeros((3, 2)))
        fc = forecast(draws, horizon=4, x_future=np.zeros((4, 2)), rng=25)
        assert np.isfinite(fc.mean).all()

    def test_presets_run_end_to_end(self):
        rng = np.random.default_rng(26)
        n = 150
        season = 8.0 * np.sin(2 * np.pi * np.arange(n) / 12)
        y = 50 + 0.05 * np.arange(n) + season + np.cumsum(rng.normal(0, 0.4, n))
        scale = float(np.var(y, ddof=1))
        for name in ("h1", "h3", "h6", "h12", "h24"):
            comps = preset_components(name, scale)
            draws = fit(comps, y, mcmc=McmcConfig(iterations=80, burn_in=30,
                                                  seed=27, chains=1))
            fc = forecast(draws, horizon=6, rng=28)
            assert np.isfinite(fc.mean).all()

    def test_same_seed_reproducible_forecast(self):
        rng = np.random.default_rng(29)
        y, _ = simulate_local_level(rng, 70, 0.2, 1.0)
        draws = fit([LocalLevel(0.1)], y, mcmc=small_mcmc(30))
        a = forecast(draws, horizon=5, rng=31)
        b = forecast(draws, horizon=5, rng=31)
        np.testing.assert_array_equal(a.draws, b.draws)


class TestInclusionProbabilities:
    def test_extremes(self):
        draws = PosteriorDraws(
            components=(), predictor_names=("always", "never"),
            alpha=np.zeros((10, 5, 0)),
            component_variances=(), component_coefs=(),
            beta=np.zeros((10, 2)),
            sigma2_eps=np.ones(10),
            gamma=np.column_stack([np.ones(10, bool), np.zeros(10, bool)]),
            loglik=np.zeros(10),
            chain_index=np.zeros(10, int),
            config=None,
        )
        probs = inclusion_probabilities(draws)
        assert probs[0] == ("always", 1.0)
        assert probs[1] == ("never", 0.0)

    def test_requires_predictors(self):
        rng = np.random.default_rng(32)
        y, _ = simulate_local_level(rng, 60, 0.2, 1.0)
        draws = fit([LocalLevel(0.1)], y, mcmc=small_mcmc(33))
        with pytest.raises(ValueError):
            inclusion_probabilities(draws)


class TestMcmcConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            McmcConfig(iterations=10, burn_in=10)
        with pytest.raises(ValueError):
            McmcConfig(chains=0)
        with pytest.raises(ValueError):
            McmcConfig(chains=2, chain_seeds=(1,))

    def test_default_seeds_distinct(self):
        cfg = McmcConfig(seed=5, chains=3)
        assert cfg.seeds() == (5, 6, 7)

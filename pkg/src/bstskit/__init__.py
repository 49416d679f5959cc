"""Bayesian structural time-series toolkit.

Composable state-space models with spike-and-slab regression, causal
predictor screening, local-projection impulse responses, and forecast
evaluation for monthly data.
"""

from .evaluation import (McbResult, MetricReport, MurphyCurve,
                         MurphyDifference, mcb, metrics, murphy_difference,
                         murphy_scores)
from .localproj import IrfResult, LpConfig, lp_irf, newey_west, select_lags_bic
from .sampler import (ForecastResult, McmcConfig, PosteriorDraws,
                      RegressionPriorConfig, VariancePrior,
                      draw_component_params, fit, forecast,
                      inclusion_probabilities, preset_components)
from .screening import (CausalReport, CcfConfig, GrangerConfig, ScreenConfig,
                        TeConfig, WaveletConfig, cross_correlation,
                        granger_test, net_information_flow, screen_all,
                        transfer_entropy, transfer_entropy_test,
                        wavelet_coherence)
from .spikeslab import (SpikeSlabPrior, SpikeSlabState, build_prior,
                        draw_beta_sigma, gibbs_sweep_gamma,
                        log_marginal_gamma, posterior_quantities)
from .statespace import (Autoregressive, FilterResult, LocalLevel,
                         LocalLinearTrend, Seasonal, StateDraw,
                         StateSpaceModel, assemble, kalman_filter,
                         kalman_smoother, simulate_states)
from .timeseries import (DesignMatrix, DiagnosticsReport, Month, TimeSeries,
                         Transform, align, apply_transform, diagnostics,
                         load_csv)

__version__ = "0.1.0"

__all__ = [
    "Autoregressive", "CausalReport", "CcfConfig", "DesignMatrix",
    "DiagnosticsReport", "FilterResult", "ForecastResult", "GrangerConfig",
    "IrfResult", "LocalLevel", "LocalLinearTrend", "LpConfig", "McbResult",
    "McmcConfig", "MetricReport", "Month", "MurphyCurve", "MurphyDifference",
    "PosteriorDraws", "RegressionPriorConfig", "ScreenConfig", "Seasonal",
    "SpikeSlabPrior", "SpikeSlabState", "StateDraw", "StateSpaceModel",
    "TeConfig", "TimeSeries", "Transform", "VariancePrior", "WaveletConfig",
    "align", "apply_transform", "assemble", "build_prior",
    "cross_correlation", "diagnostics", "draw_beta_sigma",
    "draw_component_params", "fit", "forecast", "gibbs_sweep_gamma",
    "granger_test", "inclusion_probabilities", "kalman_filter",
    "kalman_smoother", "load_csv", "log_marginal_gamma", "lp_irf", "mcb",
    "metrics", "murphy_difference", "murphy_scores", "net_information_flow",
    "newey_west", "posterior_quantities", "preset_components", "screen_all",
    "select_lags_bic", "simulate_states", "transfer_entropy",
    "transfer_entropy_test", "wavelet_coherence",
]

"""Structural state-space assembly, Kalman filtering/smoothing, state draws.

The observation equation is ``y_t = Z' alpha_t + eps_t`` with scalar noise
variance; the transition is ``alpha_{t+1} = T alpha_t + R eta_t`` with
diagonal disturbance covariance.  Regression effects are handled as a known
offset subtracted from ``y`` by the caller, never as extra states, which
keeps the state small even with hundreds of predictors.

Initialization is approximately diffuse (``1e6`` on the diagonal) for the
nonstationary blocks; a stationary AR block starts at its stationary
distribution.  Missing observations (nan) skip the measurement update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from . import _kalman
from .timeseries import TimeSeries

DIFFUSE_VARIANCE = 1.0e6


class NumericError(RuntimeError):
    """Non-finite input or a collapsed innovation variance in the filter."""


@dataclass(frozen=True)
class LocalLevel:
    """Random-walk level."""

    sigma2: float = 1.0

    kind = "level"
    state_dim = 1
    shock_dim = 1

    def __post_init__(self):
        _check_variance(self.sigma2)

    def matrices(self):
        T = np.ones((1, 1))
        Z = np.ones(1)
        R = np.ones((1, 1))
        q = np.array([self.sigma2])
        return Z, T, R, q

    def variances(self) -> tuple[float, ...]:
        return (self.sigma2,)

    def replace_params(self, variances, coefs=None) -> "LocalLevel":
        return LocalLevel(float(variances[0]))


@dataclass(frozen=True)
class LocalLinearTrend:
    """Level plus smoothly evolving slope."""

    sigma2_level: float = 1.0
    sigma2_slope: float = 1.0

    kind = "trend"
    state_dim = 2
    shock_dim = 2

    def __post_init__(self):
        _check_variance(self.sigma2_level)
        _check_variance(self.sigma2_slope)

    def matrices(self):
        T = np.array([[1.0, 1.0], [0.0, 1.0]])
        Z = np.array([1.0, 0.0])
        R = np.eye(2)
        q = np.array([self.sigma2_level, self.sigma2_slope])
        return Z, T, R, q

    def variances(self) -> tuple[float, ...]:
        return (self.sigma2_level, self.sigma2_slope)

    def replace_params(self, variances, coefs=None) -> "LocalLinearTrend":
        return LocalLinearTrend(float(variances[0]), float(variances[1]))


@dataclass(frozen=True)
class Autoregressive:
    """Stationary-or-not AR(p) component in companion form."""

    coefficients: tuple[float, ...] = (0.0,)
    sigma2: float = 1.0

    kind = "ar"
    shock_dim = 1

    def __post_init__(self):
        coefs = tuple(float(c) for c in self.coefficients)
        if len(coefs) < 1:
            raise ValueError("AR component needs order p >= 1")
        object.__setattr__(self, "coefficients", coefs)
        _check_variance(self.sigma2)

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def state_dim(self) -> int:
        return self.order

    def matrices(self):
        p = self.order
        T = np.zeros((p, p))
        T[0, :] = self.coefficients
        if p > 1:
            T[1:, :-1] = np.eye(p - 1)
        Z = np.zeros(p)
        Z[0] = 1.0
        R = np.zeros((p, 1))
        R[0, 0] = 1.0
        q = np.array([self.sigma2])
        return Z, T, R, q

    def is_stationary(self) -> bool:
        _, T, _, _ = self.matrices()
        return bool(np.max(np.abs(np.linalg.eigvals(T))) < 1.0)

    def variances(self) -> tuple[float, ...]:
        return (self.sigma2,)

    def replace_params(self, variances, coefs=None) -> "Autoregressive":
        new_coefs = self.coefficients if coefs is None else tuple(coefs)
        return Autoregressive(new_coefs, float(variances[0]))


@dataclass(frozen=True)
class Seasonal:
    """Dummy seasonal whose effects sum to zero over one cycle."""

    period: int = 12
    sigma2: float = 1.0

    kind = "seasonal"
    shock_dim = 1

    def __post_init__(self):
        if self.period < 2:
            raise ValueError("seasonal period must be >= 2")
        _check_variance(self.sigma2)

    @property
    def state_dim(self) -> int:
        return self.period - 1

    def matrices(self):
        d = self.state_dim
        T = np.zeros((d, d))
        T[0, :] = -1.0
        if d > 1:
            T[1:, :-1] = np.eye(d - 1)
        Z = np.zeros(d)
        Z[0] = 1.0
        R = np.zeros((d, 1))
        R[0, 0] = 1.0
        q = np.array([self.sigma2])
        return Z, T, R, q

    def variances(self) -> tuple[float, ...]:
        return (self.sigma2,)

    def replace_params(self, variances, coefs=None) -> "Seasonal":
        return Seasonal(self.period, float(variances[0]))


Component = LocalLevel | LocalLinearTrend | Autoregressive | Seasonal


def _check_variance(value: float) -> None:
    if not (value > 0.0) or not np.isfinite(value):
        raise ValueError(f"variance must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class StateSpaceModel:
    """Assembled system matrices plus component bookkeeping.

    Treat instances as immutable; filtering and simulation never mutate
    them, so one model can be shared across threads.
    """

    Z: np.ndarray            # (m,)
    T: np.ndarray            # (m, m)
    R: np.ndarray            # (m, q)
    Q_diag: np.ndarray       # (q,)
    sigma2_eps: float
    a1: np.ndarray           # (m,)
    P1: np.ndarray           # (m, m)
    components: tuple[Component, ...]
    state_slices: tuple[tuple[str, slice], ...]
    shock_slices: tuple[tuple[str, slice], ...]
    n_predictors: int = 0

    @property
    def state_dim(self) -> int:
        return self.Z.shape[0]

    @property
    def shock_dim(self) -> int:
        return self.Q_diag.shape[0]

    def rqr(self) -> np.ndarray:
        return (self.R * self.Q_diag) @ self.R.T


@dataclass(frozen=True)
class FilterResult:
    predicted_mean: np.ndarray    # (n, m)
    predicted_cov: np.ndarray     # (n, m, m)
    filtered_mean: np.ndarray     # (n, m)
    filtered_cov: np.ndarray      # (n, m, m)
    innovations: np.ndarray       # (n,)
    innovation_var: np.ndarray    # (n,), nan where y missing
    loglik: float
    observed: np.ndarray          # (n,) bool


@dataclass(frozen=True)
class SmootherResult:
    means: np.ndarray   # (n, m)
    covs: np.ndarray    # (n, m, m)


@dataclass(frozen=True)
class StateDraw:
    """One sampled state path, rows indexed by time."""

    states: np.ndarray  # (n, m)

    def __post_init__(self):
        if not np.isfinite(self.states).all():
            raise ValueError("state draw contains non-finite entries")


def assemble(components: Sequence[Component], n_predictors: int = 0,
             sigma2_eps: float = 1.0) -> StateSpaceModel:
    """Stack components block-diagonally into one model.

    The regression term never enters the state: callers subtract the known
    offset from the observations instead.
    """
    components = tuple(components)
    if not components and n_predictors <= 0:
        raise ValueError("empty model: no components and no predictors")
    _check_variance(sigma2_eps)

    m = sum(c.state_dim for c in components)
    q = sum(c.shock_dim for c in components)
    Z = np.zeros(m)
    T = np.zeros((m, m))
    R = np.zeros((m, q))
    Q_diag = np.zeros(q)
    P1 = np.zeros((m, m))
    a1 = np.zeros(m)

    state_slices = []
    shock_slices = []
    kind_counts: dict[str, int] = {}
    i = j = 0
    for comp in components:
        Zc, Tc, Rc, qc = comp.matrices()
        d, s = comp.state_dim, comp.shock_dim
        Z[i : i + d] = Zc
        T[i : i + d, i : i + d] = Tc
        R[i : i + d, j : j + s] = Rc
        Q_diag[j : j + s] = qc
        P1[i : i + d, i : i + d] = _initial_cov(comp, Tc, Rc, qc)

        kind_counts[comp.kind] = kind_counts.get(comp.kind, 0) + 1
        label = comp.kind if kind_counts[comp.kind] == 1 else f"{comp.kind}{kind_counts[comp.kind]}"
        state_slices.append((label, slice(i, i + d)))
        shock_slices.append((label, slice(j, j + s)))
        i += d
        j += s

    return StateSpaceModel(
        Z=Z, T=T, R=R, Q_diag=Q_diag, sigma2_eps=float(sigma2_eps),
        a1=a1, P1=P1, components=components,
        state_slices=tuple(state_slices), shock_slices=tuple(shock_slices),
        n_predictors=int(n_predictors),
    )


def _initial_cov(comp: Component, Tc, Rc, qc) -> np.ndarray:
    if comp.kind == "ar" and comp.is_stationary():
        if comp.order == 1:
            phi = comp.coefficients[0]
            return np.array([[comp.sigma2 / (1.0 - phi * phi)]])
        return solve_discrete_lyapunov(Tc, (Rc * qc) @ Rc.T)
    return DIFFUSE_VARIANCE * np.eye(comp.state_dim)


def _as_values(y) -> np.ndarray:
    if isinstance(y, TimeSeries):
        return np.asarray(y.values, dtype=float)
    return np.asarray(y, dtype=float)


def kalman_filter(model: StateSpaceModel, y) -> FilterResult:
    """Forward recursion; missing entries (nan) skip the update step."""
    vals = _as_values(y)
    observed = ~np.isnan(vals)
    bad = np.flatnonzero(np.isinf(vals))
    if bad.size:
        raise NumericError(f"non-finite observation at time index {int(bad[0])}")
    y_filled = np.where(observed, vals, 0.0)

    if model.state_dim == 0:
        return _filter_stateless(model, y_filled, observed)

    out = _kalman.filter_pass(
        y_filled, observed, model.Z, model.T, model.rqr(),
        model.sigma2_eps, model.a1, model.P1,
    )
    a_pred, P_pred, a_filt, P_filt, innov, innov_var, loglik = out
    if np.isnan(loglik):
        t_bad = int(np.flatnonzero(~(innov_var > 0) & observed)[0])
        raise NumericError(f"innovation variance not positive at time index {t_bad}")
    return FilterResult(a_pred, P_pred, a_filt, P_filt, innov, innov_var,
                        float(loglik), observed)


def _filter_stateless(model: StateSpaceModel, y: np.ndarray, observed: np.ndarray) -> FilterResult:
    n = y.shape[0]
    h = model.sigma2_eps
    innov = np.where(observed, y, 0.0)
    innov_var = np.where(observed, h, np.nan)
    loglik = float(np.sum(-0.5 * (_kalman.LOG_2PI + np.log(h) + innov[observed] ** 2 / h)))
    empty_m = np.zeros((n, 0))
    empty_c = np.zeros((n, 0, 0))
    return FilterResult(empty_m, empty_c, empty_m.copy(), empty_c.copy(),
                        innov, innov_var, loglik, observed)


def kalman_smoother(model: StateSpaceModel, filtered: FilterResult) -> SmootherResult:
    """Fixed-interval smoothing from a filter pass of the same model."""
    if filtered.predicted_mean.shape[1] != model.state_dim:
        raise ValueError("filter result does not match the model's state dimension")
    if model.state_dim == 0:
        n = filtered.innovations.shape[0]
        return SmootherResult(np.zeros((n, 0)), np.zeros((n, 0, 0)))
    means, covs = _kalman.smoother_pass(
        filtered.observed, model.Z, model.T,
        filtered.innovations, filtered.innovation_var,
        filtered.predicted_mean, filtered.predicted_cov,
    )
    return SmootherResult(means, covs)


def simulate_states(model: StateSpaceModel, y, rng) -> StateDraw:
    """One draw from p(alpha | y) via the mean-correction simulation smoother.

    An unconditional path ``(alpha+, y+)`` is simulated with a zero-mean
    initial draw, and the smoothed expectation of ``y - y+`` is added back.
    ``rng`` is a seed or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    vals = _as_values(y)
    observed = ~np.isnan(vals)
    if np.isinf(vals).any():
        raise NumericError(f"non-finite observation at time index {int(np.flatnonzero(np.isinf(vals))[0])}")
    y_filled = np.where(observed, vals, 0.0)
    n = vals.shape[0]
    m, q = model.state_dim, model.shock_dim
    if m == 0:
        return StateDraw(np.zeros((n, 0)))

    P1_chol = np.linalg.cholesky(model.P1) if np.any(model.P1) else np.zeros((m, m))
    z_init = rng.standard_normal(m)
    z_state = rng.standard_normal((n, q))
    z_obs = rng.standard_normal(n)

    draw = _kalman.simulate_conditional(
        y_filled, observed, model.Z, model.T, model.R, model.rqr(),
        np.sqrt(model.Q_diag), float(np.sqrt(model.sigma2_eps)),
        model.a1, model.P1, P1_chol, z_init, z_state, z_obs,
    )
    if not np.isfinite(draw).all():
        raise NumericError("simulation smoother produced a non-finite draw")
    return StateDraw(draw)

"""Numba cores for the Kalman recursions and the simulation smoother.

All functions take plain contiguous float64 arrays; the friendly wrappers
live in :mod:`bstskit.statespace`.  Observation noise is scalar (univariate
series), state covariance updates use the Joseph form, and every covariance
is re-symmetrized each step.  Randomness is injected as pre-drawn standard
normals so the callers own seeding.

Matrix products are hand-rolled loops: state dimensions here are tiny (a
dozen or so), where explicit loops beat the BLAS dispatch by an order of
magnitude.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOG_2PI = 1.8378770664093453


@njit(cache=True, inline="always")
def _matvec(A, x, out):
    m, n = A.shape
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        out[i] = s


@njit(cache=True, inline="always")
def _matvec_t(A, x, out):
    """out = A' x."""
    m, n = A.shape
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += A[i, j] * x[i]
        out[j] = s


@njit(cache=True, inline="always")
def _dot(x, y):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * y[i]
    return s


@njit(cache=True)
def _sandwich(T, P, RQR, out):
    """out = T P T' + RQR (P symmetric)."""
    m = T.shape[0]
    TP = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            s = 0.0
            for k in range(m):
                s += T[i, k] * P[k, j]
            TP[i, j] = s
    for i in range(m):
        for j in range(i, m):
            s = RQR[i, j]
            for k in range(m):
                s += TP[i, k] * T[j, k]
            out[i, j] = s
            out[j, i] = s


@njit(cache=True)
def filter_pass(y, observed, Z, T, RQR, H, a1, P1):
    """One forward pass.  Returns predicted/filtered moments, innovations,
    innovation variances (nan when y missing) and the Gaussian log-likelihood
    summed over observed times."""
    n = y.shape[0]
    m = a1.shape[0]
    a_pred = np.empty((n, m))
    P_pred = np.empty((n, m, m))
    a_filt = np.empty((n, m))
    P_filt = np.empty((n, m, m))
    innov = np.zeros(n)
    innov_var = np.full(n, np.nan)

    a = a1.copy()
    P = P1.copy()
    PZ = np.empty(m)
    a_next = np.empty(m)
    P_next = np.empty((m, m))
    loglik = 0.0
    for t in range(n):
        for i in range(m):
            a_pred[t, i] = a[i]
            for j in range(m):
                P_pred[t, i, j] = P[i, j]
        if observed[t]:
            _matvec(P, Z, PZ)
            f = _dot(Z, PZ) + H
            if not (f > 0.0) or not np.isfinite(f):
                loglik = np.nan
                innov_var[t] = f
                return a_pred, P_pred, a_filt, P_filt, innov, innov_var, loglik
            v = y[t] - _dot(Z, a)
            # Joseph update, expanded with one consistently rounded gain:
            # P_f = (I-KZ)P(I-KZ)' + H KK'
            #     = P - K(PZ)' - (PZ)K' + f KK'   with K = PZ/f
            for i in range(m):
                a[i] = a[i] + PZ[i] * v / f
            for i in range(m):
                gain_i = PZ[i] / f
                for j in range(i, m):
                    gain_j = PZ[j] / f
                    pf = (P[i, j] - gain_i * PZ[j] - gain_j * PZ[i]
                          + f * gain_i * gain_j)
                    P_filt[t, i, j] = pf
                    P_filt[t, j, i] = pf
            loglik += -0.5 * (LOG_2PI + np.log(f) + v * v / f)
            innov[t] = v
            innov_var[t] = f
            for i in range(m):
                a_filt[t, i] = a[i]
        else:
            for i in range(m):
                a_filt[t, i] = a[i]
                for j in range(m):
                    P_filt[t, i, j] = P[i, j]
        # predict: a = T a_f, P = T P_f T' + RQR
        _matvec(T, a_filt[t], a_next)
        _sandwich(T, P_filt[t], RQR, P_next)
        for i in range(m):
            a[i] = a_next[i]
            for j in range(m):
                P[i, j] = P_next[i, j]
    return a_pred, P_pred, a_filt, P_filt, innov, innov_var, loglik


@njit(cache=True)
def smoother_pass(observed, Z, T, innov, innov_var, a_pred, P_pred):
    """Fixed-interval smoothing via the backward r/N recursion."""
    n = a_pred.shape[0]
    m = a_pred.shape[1]
    alpha_hat = np.empty((n, m))
    V_hat = np.empty((n, m, m))
    r = np.zeros(m)
    N = np.zeros((m, m))
    gain = np.empty(m)
    PZ = np.empty(m)
    L = np.empty((m, m))
    tmp_v = np.empty(m)
    tmp_m = np.empty((m, m))
    for t in range(n - 1, -1, -1):
        P = P_pred[t]
        if observed[t]:
            f = innov_var[t]
            _matvec(P, Z, PZ)
            _matvec(T, PZ, gain)
            for i in range(m):
                gain[i] /= f
            for i in range(m):
                for j in range(m):
                    L[i, j] = T[i, j] - gain[i] * Z[j]
            # r = Z v/f + L' r ; N = ZZ'/f + L' N L
            _matvec_t(L, r, tmp_v)
            for i in range(m):
                r[i] = Z[i] * innov[t] / f + tmp_v[i]
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for k in range(m):
                        s += N[i, k] * L[k, j]
                    tmp_m[i, j] = s
            for i in range(m):
                for j in range(m):
                    s = Z[i] * Z[j] / f
                    for k in range(m):
                        s += L[k, i] * tmp_m[k, j]
                    N[i, j] = s
        else:
            # r = T' r ; N = T' N T
            _matvec_t(T, r, tmp_v)
            for i in range(m):
                r[i] = tmp_v[i]
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for k in range(m):
                        s += N[i, k] * T[k, j]
                    tmp_m[i, j] = s
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for k in range(m):
                        s += T[k, i] * tmp_m[k, j]
                    N[i, j] = s
        _matvec(P, r, tmp_v)
        for i in range(m):
            alpha_hat[t, i] = a_pred[t, i] + tmp_v[i]
        # V = P - P N P, symmetrized by construction
        for i in range(m):
            for j in range(m):
                s = 0.0
                for k in range(m):
                    s += N[i, k] * P[k, j]
                tmp_m[i, j] = s
        for i in range(m):
            for j in range(i, m):
                s = 0.0
                for k in range(m):
                    s += P[i, k] * tmp_m[k, j]
                v = P[i, j] - s
                V_hat[t, i, j] = v
                V_hat[t, j, i] = v
    return alpha_hat, V_hat


@njit(cache=True)
def simulate_unconditional(T, R, Z, q_sd, eps_sd, alpha0, z_state, z_obs):
    """Simulate (alpha, y) forward from a given initial state."""
    n = z_obs.shape[0]
    m = alpha0.shape[0]
    q = q_sd.shape[0]
    alpha = np.empty((n, m))
    y = np.empty(n)
    a = alpha0.copy()
    a_next = np.empty(m)
    for t in range(n):
        for i in range(m):
            alpha[t, i] = a[i]
        y[t] = _dot(Z, a) + eps_sd * z_obs[t]
        _matvec(T, a, a_next)
        for i in range(m):
            s = a_next[i]
            for j in range(q):
                s += R[i, j] * q_sd[j] * z_state[t, j]
            a[i] = s
    return alpha, y


@njit(cache=True)
def simulate_conditional(y, observed, Z, T, R, RQR, q_sd, eps_sd, a1, P1,
                         P1_chol, z_init, z_state, z_obs):
    """Mean-correction draw from p(alpha | y): simulate an unconditional
    path with zero initial mean, then add back the smoothed expectation of
    the residual series."""
    m = a1.shape[0]
    alpha0 = np.empty(m)
    _matvec(P1_chol, z_init, alpha0)
    alpha_plus, y_plus = simulate_unconditional(
        T, R, Z, q_sd, eps_sd, alpha0, z_state, z_obs
    )
    y_star = y - y_plus
    a_pred, P_pred, a_filt, P_filt, innov, innov_var, loglik = filter_pass(
        y_star, observed, Z, T, RQR, H=eps_sd * eps_sd, a1=a1, P1=P1
    )
    if np.isnan(loglik):
        return alpha_plus * np.nan
    alpha_hat, _ = smoother_pass(observed, Z, T, innov, innov_var, a_pred, P_pred)
    return alpha_plus + alpha_hat

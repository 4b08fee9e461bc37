"""Moment-matching estimation of window-prediction parameters from traces.

Every parameter has a direct statistical meaning in the data, so each is
estimated by the matching sample moment: the initial window by the sample
mean/covariance of the first n observations across traces, the trend by a
least-squares fit through the per-time sample means, and the noise parameters
by sample moments of the fitted residuals.  The estimators converge in
probability to the truth as the trace count grows, provided the matrix of
mean trends has full rank (the unique-mean-trend condition); nothing here
constrains the estimates to be a valid model, so diagnostics report rather
than repair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import model
from .errors import DegenerateVariance
from .gaussian import symmetrize
from .model import PlgParams

# Singular values of the mean-trend matrix below this (relative to the
# largest) count as zero when deciding the unique-mean-trend condition.
RANK_TOL = 1e-8


@dataclass(frozen=True)
class TraceSet:
    """A corpus of ``K`` equal-length traces with the dimension to fit.

    Requires at least 2 traces, and traces at least ``2 n`` steps long so the
    trend regression has at least n rows.
    """

    traces: np.ndarray
    n: int

    def __post_init__(self):
        traces = np.atleast_2d(np.asarray(self.traces, dtype=float))
        n = int(self.n)
        if n < 1:
            raise ValueError("model dimension must be at least 1")
        if traces.shape[0] < 2:
            raise ValueError("need at least 2 traces")
        if traces.shape[1] < 2 * n:
            raise ValueError(
                f"traces of length {traces.shape[1]} are too short for "
                f"dimension {n}; need at least {2 * n}")
        object.__setattr__(self, "traces", traces)
        object.__setattr__(self, "n", n)

    @property
    def num_traces(self) -> int:
        return self.traces.shape[0]

    @property
    def trace_len(self) -> int:
        return self.traces.shape[1]


@dataclass(frozen=True)
class CeDiagnostics:
    """Learning diagnostics.

    gamma_condition : condition number of the normal-equations matrix of the
        trend regression (>= 1, infinite when rank-deficient at tolerance).
    umt_ok : whether the mean-trend matrix had full effective rank, i.e. the
        trend was uniquely recoverable from the sample means.
    psd_violation : whether probe-filtering the learned parameters produced a
        window covariance failing the tolerance PSD check or a collapsed
        predictive variance.
    """

    gamma_condition: float
    umt_ok: bool
    psd_violation: bool


@dataclass(frozen=True)
class TrendFit:
    g: np.ndarray
    gamma_condition: float
    umt_ok: bool


def estimate_initial(ts: TraceSet) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and covariance of the first n observations across traces.

    Unbiased: the covariance uses the ``K - 1`` denominator.  The returned
    covariance is symmetric (and PSD) by construction.
    """
    first = ts.traces[:, :ts.n]
    mu0 = first.mean(axis=0)
    dev = first - mu0
    sigma0 = dev.T @ dev / (ts.num_traces - 1)
    return mu0, symmetrize(sigma0)


def estimate_trend(ts: TraceSet) -> TrendFit:
    """Least-squares trend through the per-time sample means.

    Builds the ``(N - n, n)`` matrix whose row ``t`` holds the sample means of
    observations ``t+1 .. t+n`` and regresses the sample means of
    observations ``n+1 .. N`` on it.  With full effective rank this is the
    normal-equations solution; otherwise the minimum-norm least-squares
    solution is returned with ``umt_ok`` false.  Rank deficiency is a data
    property (e.g. a corpus whose sample means are all zero), so it is
    reported, never raised.
    """
    n = ts.n
    ybar = ts.traces.mean(axis=0)
    gamma = sliding_window_view(ybar, n)[:ts.trace_len - n]
    lam = ybar[n:]
    g, _, rank, svals = np.linalg.lstsq(gamma, lam, rcond=RANK_TOL)
    umt_ok = int(rank) == n
    if svals.size and svals[0] > 0.0 and svals[-1] > 0.0:
        gamma_condition = float((svals[0] / svals[-1]) ** 2)
    else:
        gamma_condition = float("inf")
    return TrendFit(g, gamma_condition, umt_ok)


def estimate_noise(ts: TraceSet, g: np.ndarray) -> tuple[np.ndarray, float]:
    """Sample noise statistics from the trend residuals.

    For window start ``t = 0 .. N-n-1`` and trace ``k``, the residual is
    ``eta[k, t] = y[k, t+n] - g @ y[k, t : t+n]``.  Then, with denominator
    ``K (N - n) - 1``::

        C_i    = sum_{t,k} y[k, t+i-1] * eta[k, t] / denom     (i = 1..n)
        sigma2 = sum_{t,k} eta[k, t]^2 / denom

    sigma2 is nonnegative by construction.
    """
    g = np.asarray(g, dtype=float)
    n = ts.n
    windows = sliding_window_view(ts.traces, n, axis=1)[:, :ts.trace_len - n]
    eta = ts.traces[:, n:] - windows @ g
    denom = ts.num_traces * (ts.trace_len - n) - 1
    if denom < 1:
        raise ValueError("not enough observations to estimate noise moments")
    c_hat = np.einsum("kti,kt->i", windows, eta) / denom
    sigma2 = float(np.sum(eta * eta)) / denom
    return c_hat, sigma2


def _probe_psd(params: PlgParams, ys: np.ndarray) -> bool:
    """Filter one trace with the learned parameters, reporting True on any
    tolerance-PSD failure or collapsed predictive variance."""
    state = model.init_state(params)
    for y in ys:
        if state.Sigma[0, 0] <= model.VARIANCE_FLOOR or not state.psd_ok:
            return True
        try:
            state = model.update_state(params, state, float(y))
        except DegenerateVariance:
            return True
    return not state.psd_ok


def ce_learn(ts: TraceSet,
             clip_sigma0: bool = False) -> tuple[PlgParams, CeDiagnostics]:
    """Estimate all parameters from a trace corpus.

    Composes :func:`estimate_initial`, :func:`estimate_trend` and
    :func:`estimate_noise`, then probe-filters the result over the corpus's
    first trace to populate the ``psd_violation`` diagnostic.  The estimates
    are returned unmodified: invalid-but-estimated models are a documented
    outcome, and silent repair would mask it.  ``clip_sigma0`` optionally
    floors negative eigenvalues of the initial covariance at zero (the one
    repair offered, off by default).
    """
    mu0, sigma0 = estimate_initial(ts)
    fit = estimate_trend(ts)
    c_hat, sigma2 = estimate_noise(ts, fit.g)
    if clip_sigma0:
        w, v = np.linalg.eigh(sigma0)
        sigma0 = symmetrize((v * np.clip(w, 0.0, None)) @ v.T)
    params = PlgParams(mu0, sigma0, fit.g, c_hat, sigma2)
    violation = _probe_psd(params, ts.traces[0])
    return params, CeDiagnostics(fit.gamma_condition, fit.umt_ok, violation)

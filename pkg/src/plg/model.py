"""Predictive linear-Gaussian model of scalar time series.

The model's state is the joint Gaussian of the *next n observations* given
everything observed so far: a mean window ``mu`` and covariance ``Sigma``.
Dynamics beyond the window are characterized by a trend vector ``g``, a noise
variance ``sigma2``, and the covariance ``C`` between that noise and the
window: the observation one past the window equals ``g @ window`` plus noise.

Consuming an observation conditions the (n+1)-dimensional joint of
(window, next-beyond-window) on its first coordinate, which collapses to the
closed-form update implemented in :func:`update_state`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, gaussian
from .errors import DegenerateVariance
from .gaussian import GaussianDist, LOG_2PI, symmetrize

# Predictive variance must exceed this before it can divide an innovation.
VARIANCE_FLOOR = 1e-12
# Symmetry / PSD tolerance for parameter and state covariances.
COV_TOL = 1e-10


@dataclass(frozen=True)
class PlgParams:
    """Model parameters.

    mu0, Sigma0 : mean and covariance of the first n observations
    g : trend applied to the window to extend it by one step
    C : covariance of the extension noise with the window it extends
    sigma2 : variance of the extension noise

    ``Sigma0`` must be symmetric PSD within tolerance and ``sigma2 >= 0``.
    Immutable; safe to share across threads.
    """

    mu0: np.ndarray
    Sigma0: np.ndarray
    g: np.ndarray
    C: np.ndarray
    sigma2: float

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        Sigma0 = np.atleast_2d(np.asarray(self.Sigma0, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        C = np.atleast_1d(np.asarray(self.C, dtype=float))
        n = mu0.size
        if n < 1:
            raise ValueError("model dimension must be at least 1")
        if Sigma0.shape != (n, n) or g.shape != (n,) or C.shape != (n,):
            raise ValueError("parameter shapes are inconsistent")
        if not gaussian.is_symmetric(Sigma0, COV_TOL):
            raise ValueError("Sigma0 is not symmetric within tolerance")
        if not gaussian.is_psd(Sigma0, COV_TOL):
            raise ValueError("Sigma0 is not positive semidefinite within tolerance")
        sigma2 = float(self.sigma2)
        if sigma2 < 0.0:
            raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "Sigma0", symmetrize(Sigma0))
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def n(self) -> int:
        return self.mu0.size


@dataclass(frozen=True)
class PlgState:
    """Filtered state after ``t`` observations: window mean and covariance.

    ``psd_ok`` records whether ``Sigma`` passed the tolerance PSD check after
    the update that produced it.  It is a diagnostic, not a guarantee:
    unconstrained learned parameters can drive the window covariance
    indefinite while filtering must still proceed.
    """

    mu: np.ndarray
    Sigma: np.ndarray
    t: int
    psd_ok: bool = True


def companion_matrix(g: np.ndarray) -> np.ndarray:
    """Window-shift matrix: row i selects window entry i+1, the last row applies g.

    Multiplying the window mean by this matrix drops the oldest entry and
    appends the trend-predicted next one.  For dimension 1 it is ``[[g_1]]``.
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    n = g.size
    m = np.zeros((n, n))
    if n > 1:
        m[np.arange(n - 1), np.arange(1, n)] = 1.0
    m[n - 1] = g
    return m


def init_state(params: PlgParams) -> PlgState:
    """State before any observation: the initial window distribution."""
    return PlgState(params.mu0.copy(), params.Sigma0.copy(), 0, True)


def update_state(params: PlgParams, state: PlgState, y: float) -> PlgState:
    """Consume one observation and return the next window state.

    With ``G`` the companion matrix, ``a = Sigma[0, 0]`` the predictive
    variance, ``F = G Sigma e_1 + C_1 e_n`` and
    ``B = sigma2 e_n e_n' + (GC) e_n' + e_n (GC)'``::

        mu'    = G mu + F (y - mu[0]) / a
        Sigma' = G Sigma G' + B - F F' / a   (explicitly symmetrized)

    Returns a new state (no mutation), with ``t`` incremented and ``psd_ok``
    set from a tolerance eigenvalue check of ``Sigma'``.

    Raises
    ------
    DegenerateVariance
        If the predictive variance is at or below ``VARIANCE_FLOOR``, which
        typically signals invalid learned parameters.
    """
    n = params.n
    alpha = state.Sigma[0, 0]
    if alpha <= VARIANCE_FLOOR:
        raise DegenerateVariance(
            f"predictive variance {alpha:.3e} at t={state.t}", t=state.t)
    G = companion_matrix(params.g)
    e_n = np.zeros(n)
    e_n[n - 1] = 1.0
    gc = G @ params.C
    B = params.sigma2 * np.outer(e_n, e_n) + np.outer(gc, e_n) + np.outer(e_n, gc)
    F = G @ state.Sigma[:, 0] + params.C[0] * e_n
    mu = G @ state.mu + F * ((float(y) - state.mu[0]) / alpha)
    Sigma = symmetrize(G @ state.Sigma @ G.T + B - np.outer(F, F) / alpha)
    return PlgState(mu, Sigma, state.t + 1, gaussian.is_psd(Sigma, COV_TOL))


def predict_next(state: PlgState) -> GaussianDist:
    """One-step predictive distribution: the window's first coordinate.

    The variance is reported as-is, even when tiny or invalid; consumers that
    divide by it must gate on the variance floor themselves.
    """
    return GaussianDist(np.array([state.mu[0]]),
                        np.array([[state.Sigma[0, 0]]]))


def extend_window(params: PlgParams, state: PlgState, m: int) -> GaussianDist:
    """Joint distribution of the next ``n + m`` observations given the history.

    Each appended coordinate is the trend applied to the trailing n
    coordinates plus a noise term of variance ``sigma2`` whose covariance with
    that trailing window is ``C`` and with all earlier coordinates zero.  One
    appended step therefore adds mean ``g @ window_mean``, cross-covariance
    column ``Cov[existing, window] @ g`` (plus ``C`` on the window block) and
    variance ``g' Sigma_win g + 2 g @ C + sigma2``.

    The leading n-by-n block of the result is the current state, bit-exact.
    """
    if m < 1:
        raise ValueError("extension length must be positive")
    n = params.n
    g = params.g
    C = params.C
    mean = np.empty(n + m)
    cov = np.zeros((n + m, n + m))
    mean[:n] = state.mu
    cov[:n, :n] = state.Sigma
    for d in range(n, n + m):
        col = cov[:d, d - n:d] @ g
        col[d - n:] += C
        var = float(g @ cov[d - n:d, d - n:d] @ g + 2.0 * (g @ C) + params.sigma2)
        mean[d] = mean[d - n:d] @ g
        cov[:d, d] = col
        cov[d, :d] = col
        cov[d, d] = var
    return GaussianDist(mean, cov)


def filter_trace(params: PlgParams, ys) -> tuple[np.ndarray, np.ndarray]:
    """One-step predictive moments at every step of a trace.

    Returns ``(means, variances)`` where entry ``t`` describes the predictive
    distribution of observation ``t`` given observations ``0..t-1``.  The
    variance sequence does not depend on the observations.

    Raises ``DegenerateVariance`` (carrying the step index) if a predictive
    variance collapses anywhere along the trace.
    """
    ys = np.ascontiguousarray(ys, dtype=float)
    if ys.ndim != 1 or ys.size < 1:
        raise ValueError("trace must be a nonempty vector")
    means, variances = _kernels.plg_filter_batch(
        params.mu0, params.Sigma0, params.g, params.C, params.sigma2,
        ys[None, :])
    return means[0], variances


def loglik_batch(params: PlgParams, traces) -> np.ndarray:
    """Log-likelihood of each row of a (num_traces, trace_len) array."""
    Y = np.ascontiguousarray(traces, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ValueError("traces must be a (num_traces, trace_len) array")
    means, variances = _kernels.plg_filter_batch(
        params.mu0, params.Sigma0, params.g, params.C, params.sigma2, Y)
    dev = Y - means
    return -0.5 * np.sum(LOG_2PI + np.log(variances)[None, :]
                         + dev * dev / variances[None, :], axis=1)


def loglik(params: PlgParams, ys) -> float:
    """Log-likelihood of one trace.

    Equals the sum over steps of the one-step predictive log density, which by
    the conditioning identity is also the log density of the full joint.
    """
    ys = np.ascontiguousarray(ys, dtype=float)
    if ys.ndim != 1 or ys.size < 1:
        raise ValueError("trace must be a nonempty vector")
    return float(loglik_batch(params, ys[None, :])[0])


def sample_traces(params: PlgParams, trace_len: int, num_traces: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Sample a (num_traces, trace_len) corpus; deterministic given the seed.

    Each step draws the next observation from the one-step predictive
    distribution and updates the state.  A step whose predictive variance is
    at or below the floor is treated as deterministic: the observation equals
    the predictive mean and the update reduces to the window shift (the
    conditioning correction vanishes for an almost-surely constant
    coordinate).  Negative variances within tolerance are clamped to zero, as
    when sampling any near-degenerate Gaussian.
    """
    if trace_len < 1 or num_traces < 1:
        raise ValueError("trace_len and num_traces must be positive")
    normals = rng.standard_normal((num_traces, trace_len))
    return _kernels.plg_sample_batch(
        params.mu0, params.Sigma0, params.g, params.C, params.sigma2, normals)


def sample_trace(params: PlgParams, trace_len: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Sample one trace; consumes exactly ``trace_len`` normal draws."""
    return sample_traces(params, trace_len, 1, rng)[0]


def param_count(n: int) -> int:
    """Distinct scalar parameters of an n-dimensional model.

    n for mu0, n(n+1)/2 for the symmetric Sigma0, n each for g and C, and 1
    for sigma2.
    """
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return n * (n + 1) // 2 + 3 * n + 1

"""Linear dynamical system with scalar observations.

Latent state ``x`` evolves as ``x' ~ N(A x, Q)`` and each observation is
``y ~ N(H x, R)``.  The Kalman recursions below maintain the latent prior and
posterior exactly, which makes this module the independent reference for
everything the window-prediction model computes.

Scalar observations keep every innovation variance a scalar, so no matrix
inversion appears anywhere in the filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, gaussian
from .errors import DegenerateVariance
from .gaussian import GaussianDist, LOG_2PI, psd_factor, symmetrize

VARIANCE_FLOOR = 1e-12
COV_TOL = 1e-10


@dataclass(frozen=True)
class LdsParams:
    """System parameters: transition A, observation row H, state noise
    covariance Q, observation noise variance R, and the prior mean/covariance
    (x1hat, P1) of the first latent state.

    Q and P1 must be symmetric PSD within tolerance and R >= 0.  Immutable.
    """

    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: float
    x1hat: np.ndarray
    P1: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        H = np.atleast_1d(np.asarray(self.H, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        x1hat = np.atleast_1d(np.asarray(self.x1hat, dtype=float))
        P1 = np.atleast_2d(np.asarray(self.P1, dtype=float))
        n = H.size
        if n < 1:
            raise ValueError("state dimension must be at least 1")
        if A.shape != (n, n) or Q.shape != (n, n) or P1.shape != (n, n) \
                or x1hat.shape != (n,):
            raise ValueError("parameter shapes are inconsistent")
        for name, mat in (("Q", Q), ("P1", P1)):
            if not gaussian.is_symmetric(mat, COV_TOL):
                raise ValueError(f"{name} is not symmetric within tolerance")
            if not gaussian.is_psd(mat, COV_TOL):
                raise ValueError(f"{name} is not PSD within tolerance")
        R = float(self.R)
        if R < 0.0:
            raise ValueError(f"R must be nonnegative, got {R}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Q", symmetrize(Q))
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "x1hat", x1hat)
        object.__setattr__(self, "P1", symmetrize(P1))

    @property
    def n(self) -> int:
        return self.H.size


@dataclass(frozen=True)
class KalmanState:
    """Filter state after ``t`` observations.

    ``xhat_minus``/``P_minus`` are the prior for the next step; ``xhat``/``P``
    are the posterior of the step just consumed (``None`` before the first
    update).  Both are kept so that multi-step predictions, which are phrased
    on the prior, can be evaluated directly.
    """

    xhat_minus: np.ndarray
    P_minus: np.ndarray
    xhat: np.ndarray | None = None
    P: np.ndarray | None = None
    t: int = 0


def init_state(params: LdsParams) -> KalmanState:
    return KalmanState(params.x1hat.copy(), params.P1.copy(), None, None, 0)


def update_state(params: LdsParams, state: KalmanState, y: float) -> KalmanState:
    """One Kalman step: measurement update, then time update of the prior.

    Gain ``k = P- H' / (H P- H' + R)``; posterior
    ``xhat = xhat- + k (y - H xhat-)`` and ``P = (I - k H) P-`` (symmetrized);
    then the prior advances: ``xhat- <- A xhat``, ``P- <- A P A' + Q``.

    Raises ``DegenerateVariance`` if the innovation variance is at or below
    the floor.
    """
    H = params.H
    s = float(H @ state.P_minus @ H + params.R)
    if s <= VARIANCE_FLOOR:
        raise DegenerateVariance(
            f"innovation variance {s:.3e} at t={state.t}", t=state.t)
    k = (state.P_minus @ H) / s
    xhat = state.xhat_minus + k * (float(y) - H @ state.xhat_minus)
    P = symmetrize(state.P_minus - np.outer(k, H @ state.P_minus))
    xm = params.A @ xhat
    Pm = symmetrize(params.A @ P @ params.A.T + params.Q)
    return KalmanState(xm, Pm, xhat, P, state.t + 1)


def predictive(params: LdsParams, state: KalmanState) -> GaussianDist:
    """One-step predictive distribution ``N(H xhat-, H P- H' + R)``."""
    H = params.H
    return GaussianDist(np.array([float(H @ state.xhat_minus)]),
                        np.array([[float(H @ state.P_minus @ H) + params.R]]))


def noise_sum(params: LdsParams, i: int) -> np.ndarray:
    """Process-noise covariance accumulated over ``i`` steps.

    ``sum_{k=1..i} A^{k-1} Q (A^{k-1})'``; the empty sum (i = 0) is zero.
    """
    if i < 0:
        raise ValueError("step count must be nonnegative")
    n = params.n
    total = np.zeros((n, n))
    a_pow = np.eye(n)
    for _ in range(i):
        total += a_pow @ params.Q @ a_pow.T
        a_pow = params.A @ a_pow
    return symmetrize(total)


def multi_step(params: LdsParams, state: KalmanState, i: int,
               j: int) -> tuple[float, float]:
    """Mean of the i-th future observation and its covariance with the j-th.

    Both horizons count from the state's prior, so with prior ``(xhat-, P-)``::

        mean_i  = H A^(i-1) xhat-
        cov_ij  = H A^(j-1) P- (A^(i-1))' H' + [i == j] R
                  + H A^(j-i) (accumulated noise over i-1 steps) H'

    Requires ``1 <= i <= j``.  At i = j this is the variance of the i-th
    future observation; at i = j = 1 it reduces to the one-step predictive.
    """
    if i < 1 or j < i:
        raise ValueError("horizons must satisfy 1 <= i <= j")
    A, H = params.A, params.H
    a_i = np.linalg.matrix_power(A, i - 1)
    a_j = np.linalg.matrix_power(A, j - 1)
    a_diff = np.linalg.matrix_power(A, j - i)
    mean = float(H @ a_i @ state.xhat_minus)
    cov = float(H @ a_j @ state.P_minus @ a_i.T @ H)
    if i == j:
        cov += params.R
    cov += float(H @ a_diff @ noise_sum(params, i - 1) @ H)
    return mean, cov


def filter_trace(params: LdsParams, ys) -> tuple[np.ndarray, np.ndarray]:
    """One-step predictive moments at every step of a trace."""
    ys = np.ascontiguousarray(ys, dtype=float)
    if ys.ndim != 1 or ys.size < 1:
        raise ValueError("trace must be a nonempty vector")
    means, variances = _kernels.kalman_filter_batch(
        params.A, params.H, params.Q, params.R, params.x1hat, params.P1,
        ys[None, :])
    return means[0], variances


def loglik_batch(params: LdsParams, traces) -> np.ndarray:
    """Log-likelihood of each row of a (num_traces, trace_len) array."""
    Y = np.ascontiguousarray(traces, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ValueError("traces must be a (num_traces, trace_len) array")
    means, variances = _kernels.kalman_filter_batch(
        params.A, params.H, params.Q, params.R, params.x1hat, params.P1, Y)
    dev = Y - means
    return -0.5 * np.sum(LOG_2PI + np.log(variances)[None, :]
                         + dev * dev / variances[None, :], axis=1)


def loglik(params: LdsParams, ys) -> float:
    """Log-likelihood of one trace (chained one-step predictive densities)."""
    ys = np.ascontiguousarray(ys, dtype=float)
    if ys.ndim != 1 or ys.size < 1:
        raise ValueError("trace must be a nonempty vector")
    return float(loglik_batch(params, ys[None, :])[0])


def sample_trace(params: LdsParams, trace_len: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Simulate one trace: draw the first latent state from its prior, then
    alternate observation and state-transition noise.  Deterministic given the
    generator state; draw order is fixed as (initial state, then per step:
    observation noise, state noise)."""
    if trace_len < 1:
        raise ValueError("trace_len must be positive")
    n = params.n
    l_p1 = psd_factor(params.P1)
    l_q = psd_factor(params.Q)
    sr = np.sqrt(params.R)
    x = params.x1hat + l_p1 @ rng.standard_normal(n)
    ys = np.empty(trace_len)
    for t in range(trace_len):
        ys[t] = float(params.H @ x) + sr * rng.standard_normal()
        if t < trace_len - 1:
            x = params.A @ x + l_q @ rng.standard_normal(n)
    return ys


def sample_traces(params: LdsParams, trace_len: int, num_traces: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Simulate a corpus, one trace after another from a single stream."""
    if num_traces < 1:
        raise ValueError("num_traces must be positive")
    return np.stack([sample_trace(params, trace_len, rng)
                     for _ in range(num_traces)])


def param_count(n: int) -> int:
    """Distinct scalar parameters: n^2 for A, n for H, n(n+1)/2 each for the
    symmetric Q and P1, 1 for R, and n for x1hat."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return 2 * n * n + 3 * n + 1

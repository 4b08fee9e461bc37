"""Closed-form conversion of a linear dynamical system into the equivalent
window-prediction parameters.

Any n-dimensional scalar-observation system has an exact n-dimensional
window-prediction counterpart: the initial window moments are the system's
multi-step predictive moments from the initial prior, the trend solves a
linear system against the observability matrix, and the noise parameters
follow from the process-noise contributions to the window covariance.  This
bridge is what lets every window-model computation be checked against the
Kalman recursions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetryDetected, NegativeSigma2, NoSolution
from .gaussian import symmetrize
from .lds import LdsParams
from .model import PlgParams

# Relative symmetry tolerance for the noise-covariance matrix, which is
# symmetric in exact arithmetic; a violation signals an indexing fault.
NOISE_SYM_TOL = 1e-8
# Singular values below this (relative to the largest) do not count toward
# the effective rank of the observability matrix.
RANK_TOL = 1e-10
# The trend solve must reproduce its right-hand side this well (relative),
# with an absolute floor for targets that decay to floating-point dust under
# strongly contracting transitions.
RESIDUAL_TOL = 1e-6
RESIDUAL_FLOOR = 1e-12
# sigma2 more negative than this signals breakdown instead of rounding.
SIGMA2_CLAMP = -1e-8


@dataclass(frozen=True)
class ConversionIntermediates:
    """Reusable pieces of the conversion.

    obs_mat : (n, n)
        Observability matrix; row i maps the latent prior to the mean of the
        (i+1)-th future observation.
    noise_cov : (n, n)
        Process-noise contribution to the window covariance: entry (i, j) is
        the part of Cov[obs i+1, obs j+1] due to state noise.  Symmetric.
    noise_cross : list of n+1 vectors
        Vector ``i`` holds the process-noise part of the covariance between
        each window observation and observation ``i+1``; the first n vectors
        are the columns of ``noise_cov``, the last one reaches one step past
        the window.
    noise_sums : list of n+1 matrices
        Accumulated state-noise covariance after 0..n steps.
    """

    obs_mat: np.ndarray
    noise_cov: np.ndarray
    noise_cross: list
    noise_sums: list


@dataclass(frozen=True)
class TrendSolution:
    """Minimum-norm trend solve with its residual norm and effective rank."""

    g: np.ndarray
    residual: float
    rank: int


def _obs_rows(lds: LdsParams, count: int) -> np.ndarray:
    """Rows H, HA, ..., HA^(count-1)."""
    rows = np.empty((count, lds.n))
    row = lds.H.copy()
    for i in range(count):
        rows[i] = row
        row = row @ lds.A
    return rows


def _noise_sums(lds: LdsParams, count: int) -> list:
    """Accumulated state-noise covariances for 0..count steps."""
    n = lds.n
    sums = [np.zeros((n, n))]
    a_pow = np.eye(n)
    for _ in range(count):
        sums.append(symmetrize(sums[-1] + a_pow @ lds.Q @ a_pow.T))
        a_pow = lds.A @ a_pow
    return sums


def observability_matrix(lds: LdsParams) -> np.ndarray:
    """The (n, n) matrix whose row i (0-based) is H A^i."""
    return _obs_rows(lds, lds.n)


def noise_covariances(lds: LdsParams) -> ConversionIntermediates:
    """Process-noise covariance structure of the observation window.

    For window positions ``1 <= j <= n`` and target observation ``i+1``
    (``0 <= i <= n``), the noise part of Cov[obs j, obs i+1] is::

        H A^(i-j+1) S_(j-1) H'    for j <= i
        H A^(j-i-1) S_i     H'    for j >= i+1

    with ``S_k`` the accumulated noise covariance after k steps.  The first n
    vectors assemble column-wise into a matrix that must come out symmetric;
    a tolerance violation raises ``AsymmetryDetected``.
    """
    n = lds.n
    h = lds.H
    h_pows = _obs_rows(lds, n + 1)
    sums = _noise_sums(lds, n)
    cross = []
    for i in range(n + 1):
        vec = np.empty(n)
        for j in range(1, n + 1):
            if j <= i:
                vec[j - 1] = h_pows[i - j + 1] @ sums[j - 1] @ h
            else:
                vec[j - 1] = h_pows[j - i - 1] @ sums[i] @ h
        cross.append(vec)
    noise_cov = np.column_stack(cross[:n])
    gap = float(np.max(np.abs(noise_cov - noise_cov.T)))
    scale = 1.0 + float(np.max(np.abs(noise_cov)))
    if gap > NOISE_SYM_TOL * scale:
        raise AsymmetryDetected(
            f"window noise covariance asymmetric by {gap:.3e} "
            f"(scale {scale:.3e})")
    return ConversionIntermediates(observability_matrix(lds),
                                   symmetrize(noise_cov), cross, sums)


def solve_trend(lds: LdsParams) -> TrendSolution:
    """Trend vector g with ``g @ obs_mat == H A^n``, by minimum-norm least squares.

    Minimum-norm makes the choice deterministic when the observability matrix
    is rank-deficient.  The solve reports its residual norm and the effective
    rank; a residual above ``RESIDUAL_TOL`` times the target norm means the
    target leaves the row space, which flags a misspecified dimension.
    """
    rows = _obs_rows(lds, lds.n + 1)
    obs_mat = rows[:lds.n]
    target = rows[lds.n]
    # solve at machine precision; RANK_TOL only classifies the reported rank
    g, _, _, svals = np.linalg.lstsq(obs_mat.T, target, rcond=None)
    rank = int(np.sum(svals > RANK_TOL * svals[0])) if svals.size else 0
    residual = float(np.linalg.norm(g @ obs_mat - target))
    target_norm = float(np.linalg.norm(target))
    scale = 1.0 + float(np.linalg.norm(obs_mat))
    if residual > RESIDUAL_TOL * target_norm + RESIDUAL_FLOOR * scale:
        raise NoSolution(
            f"trend residual {residual:.3e} exceeds tolerance for target of "
            f"norm {target_norm:.3e} (effective rank {rank} of {lds.n})")
    return TrendSolution(g, residual, int(rank))


def to_plg(lds: LdsParams) -> PlgParams:
    """Window-prediction parameters equivalent to the given system.

    mu0 and Sigma0 are the multi-step predictive moments of the first n
    observations from the initial prior (computed directly from their closed
    forms, so they can be cross-checked against the filter's multi-step
    predictions); the trend comes from :func:`solve_trend`; then::

        C      = noise_cross[n] - noise_cov @ g - R g
        sigma2 = H S_n H' + R - g @ noise_cross[n] - C @ g

    sigma2 within ``SIGMA2_CLAMP`` of zero is clamped to 0; more negative
    raises ``NegativeSigma2``.
    """
    n = lds.n
    h = lds.H
    h_pows = _obs_rows(lds, n + 1)
    sums = _noise_sums(lds, n)
    mu0 = h_pows[:n] @ lds.x1hat
    Sigma0 = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            val = float(h_pows[j - 1] @ lds.P1 @ h_pows[i - 1])
            if i == j:
                val += lds.R
            val += float(h_pows[j - i] @ sums[i - 1] @ h)
            Sigma0[i - 1, j - 1] = val
            Sigma0[j - 1, i - 1] = val
    trend = solve_trend(lds)
    inter = noise_covariances(lds)
    g = trend.g
    C = inter.noise_cross[n] - inter.noise_cov @ g - lds.R * g
    sigma2 = float(h @ sums[n] @ h) + lds.R \
        - float(g @ inter.noise_cross[n]) - float(C @ g)
    if sigma2 < SIGMA2_CLAMP:
        raise NegativeSigma2(
            f"extension noise variance {sigma2:.3e} is negative beyond "
            f"rounding tolerance")
    return PlgParams(mu0, symmetrize(Sigma0), g, C, max(sigma2, 0.0))

"""Multivariate Gaussian primitives: representation, conditioning, density, sampling.

Every other module builds on these: filtering is repeated conditioning of a
joint Gaussian on its first coordinate, likelihoods are chained log densities,
and simulation draws from (possibly near-degenerate) Gaussians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, SingularCovariance

LOG_2PI = float(np.log(2.0 * np.pi))

# Variance at or below this counts as deterministic when conditioning.
VARIANCE_FLOOR = 1e-12
# Element-wise relative symmetry tolerance for covariance matrices.
SYMMETRY_TOL = 1e-12
# Relative eigenvalue tolerance for positive-semidefiniteness checks.
PSD_TOL = 1e-10
# Relative eigenvalue cutoff below which a covariance counts as singular
# for density evaluation.
SINGULARITY_TOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return ``(m + m.T) / 2``.

    Stored after every formula that is symmetric in exact arithmetic, so
    asymmetry cannot drift through long update chains.  Bit-preserves
    matrices that are already exactly symmetric.
    """
    return (m + m.T) / 2.0


def is_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    """Element-wise symmetry check: |m_ij - m_ji| <= tol * (1 + |m_ij|)."""
    return bool(np.all(np.abs(m - m.T) <= tol * (1.0 + np.abs(m))))


def is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    """Tolerance PSD check: smallest eigenvalue >= -tol * (1 + largest)."""
    w = np.linalg.eigvalsh(symmetrize(np.asarray(m, dtype=float)))
    return bool(w[0] >= -tol * (1.0 + w[-1]))


def psd_factor(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Factor ``L`` with ``L @ L.T == cov`` after clamping tiny negative eigenvalues.

    Eigenvalues within ``-tol * (1 + largest)`` of zero are floored at zero so
    that near-degenerate covariances remain sampleable; anything more negative
    raises ``ValueError``.
    """
    cov = symmetrize(np.asarray(cov, dtype=float))
    w, v = np.linalg.eigh(cov)
    if w[0] < -tol * (1.0 + w[-1]):
        raise ValueError(
            f"covariance is not positive semidefinite within tolerance "
            f"(eigenvalue {w[0]:.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class GaussianDist:
    """A multivariate normal N(mean, cov).

    Parameters
    ----------
    mean : (p,) array
    cov : (p, p) array, symmetric within tolerance.  The stored matrix is
        explicitly symmetrized.

    Instances are immutable and safe to share across threads.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean of "
                             f"dimension {mean.size}")
        if not is_symmetric(cov):
            raise ValueError("cov is not symmetric within tolerance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", symmetrize(cov))

    @property
    def dim(self) -> int:
        return self.mean.size


def condition_on_first(joint: GaussianDist, y: float) -> GaussianDist:
    """Condition a joint Gaussian on its first coordinate taking value ``y``.

    With mean split as ``[m_y, m_z]`` and covariance ``[[v_yy, s.T], [s, S_zz]]``,
    the remaining coordinates given the first are distributed as::

        N(m_z + s * (y - m_y) / v_yy,  S_zz - s s.T / v_yy)

    The returned covariance does not depend on ``y``.

    Raises
    ------
    DegenerateVariance
        If the first coordinate's variance is at or below ``VARIANCE_FLOOR``
        (conditioning on an almost-deterministic coordinate).
    """
    if joint.dim < 2:
        raise ValueError("need at least two coordinates to condition")
    v_yy = joint.cov[0, 0]
    if v_yy <= VARIANCE_FLOOR:
        raise DegenerateVariance(
            f"cannot condition on a coordinate with variance {v_yy:.3e}")
    s = joint.cov[1:, 0]
    mean = joint.mean[1:] + s * ((float(y) - joint.mean[0]) / v_yy)
    cov = joint.cov[1:, 1:] - np.outer(s, s) / v_yy
    return GaussianDist(mean, symmetrize(cov))


def log_density(dist: GaussianDist, x) -> float:
    """Natural-log density of ``dist`` at ``x``.

    Computed as ``-(p ln(2 pi) + ln det(cov) + d.T cov^-1 d) / 2`` through a
    Cholesky factorization; the covariance is never inverted explicitly.

    Raises
    ------
    SingularCovariance
        If the smallest eigenvalue is at or below ``SINGULARITY_TOL`` times
        the largest.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != dist.mean.shape:
        raise ValueError(f"point of dimension {x.size} does not match "
                         f"distribution of dimension {dist.dim}")
    w = np.linalg.eigvalsh(dist.cov)
    if w[0] <= SINGULARITY_TOL * max(w[-1], 0.0):
        raise SingularCovariance(
            f"covariance is singular at tolerance (eigenvalues "
            f"{w[0]:.3e} .. {w[-1]:.3e})")
    try:
        chol = np.linalg.cholesky(dist.cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    z = np.linalg.solve(chol, x - dist.mean)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -0.5 * (dist.dim * LOG_2PI + log_det + float(z @ z))


def sample(dist: GaussianDist, rng: np.random.Generator) -> np.ndarray:
    """One draw ``mean + L xi`` with ``xi`` i.i.d. standard normal from ``rng``.

    ``L`` comes from :func:`psd_factor`, so eigenvalues that are negative
    within tolerance are clamped to zero first; a zero covariance returns the
    mean exactly.  Deterministic given the generator state.  The caller must
    hold the generator exclusively.
    """
    return dist.mean + psd_factor(dist.cov) @ rng.standard_normal(dist.dim)

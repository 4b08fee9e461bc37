"""Random test-system generation, reproducible from a single seed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import symmetrize
from .lds import LdsParams

R_MODES = ("variance", "literal")
# Spectral radii at or below this trigger a redraw of the transition matrix.
RADIUS_FLOOR = 1e-12
MAX_REDRAWS = 100


@dataclass(frozen=True)
class GenConfig:
    """Generation request: dimension, 64-bit seed, and how to read the
    observation-noise scale (see :func:`random_lds`)."""

    n: int
    seed: int
    r_mode: str = "variance"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if self.r_mode not in R_MODES:
            raise ValueError(f"r_mode must be one of {R_MODES}")


def random_correlation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random correlation matrix: the Gram matrix of n directions drawn
    uniformly on the unit sphere in dimension n+1.

    Unit diagonal and positive semidefiniteness hold by construction; the
    diagonal is pinned to exactly 1.
    """
    if n < 1:
        raise ValueError("dimension must be at least 1")
    vecs = rng.standard_normal((n, n + 1))
    norms = np.linalg.norm(vecs, axis=1)
    while np.any(norms < 1e-12):  # measure-zero; redraw the bad rows
        bad = norms < 1e-12
        vecs[bad] = rng.standard_normal((int(bad.sum()), n + 1))
        norms = np.linalg.norm(vecs, axis=1)
    vecs /= norms[:, None]
    corr = symmetrize(vecs @ vecs.T)
    np.fill_diagonal(corr, 1.0)
    return corr


def _spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def random_lds(cfg: GenConfig) -> LdsParams:
    """Draw system parameters; deterministic given the seed.

    Recipe (draws happen in exactly this order, which is a compatibility
    contract for seeded reproducibility):

    1. H, A, x1hat element-wise uniform on (-1, 1).
    2. lam uniform on (0, 1); A rescaled so its spectral radius equals lam,
       keeping observations bounded in probability.  A with spectral radius
       at or below the floor is redrawn (at most ``MAX_REDRAWS`` times).
    3. Q = D Q' D with Q' a random correlation matrix and D diagonal with
       entries 2**u, u uniform on (-1, 1): variances in (1/4, 4) with random
       correlations.  P1 is drawn the same way.
    4. R from one more u uniform on (-1, 1): ``2**(2u)`` in variance mode so
       R spans the same (1/4, 4) variance range as Q's diagonal, or the
       literal scale ``2**u`` in (1/2, 2) in literal mode.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    h = rng.uniform(-1.0, 1.0, n)
    a = rng.uniform(-1.0, 1.0, (n, n))
    x1hat = rng.uniform(-1.0, 1.0, n)
    lam = rng.uniform(0.0, 1.0)
    radius = _spectral_radius(a)
    redraws = 0
    while radius <= RADIUS_FLOOR:
        redraws += 1
        if redraws > MAX_REDRAWS:
            raise RuntimeError(
                "could not draw a transition matrix with nonzero spectral "
                "radius")
        a = rng.uniform(-1.0, 1.0, (n, n))
        radius = _spectral_radius(a)
    a = a * (lam / radius)

    def _scaled_cov() -> np.ndarray:
        corr = random_correlation(n, rng)
        scale = 2.0 ** rng.uniform(-1.0, 1.0, n)
        return symmetrize(scale[:, None] * corr * scale[None, :])

    q = _scaled_cov()
    p1 = _scaled_cov()
    u = rng.uniform(-1.0, 1.0)
    r = 2.0 ** (2.0 * u) if cfg.r_mode == "variance" else 2.0 ** u
    return LdsParams(a, h, q, r, x1hat, p1)

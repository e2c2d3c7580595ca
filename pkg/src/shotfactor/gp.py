"""Squared-exponential covariance over tile centers and Gaussian field draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .court import CourtGrid


@dataclass(frozen=True)
class KernelHyper:
    """Marginal variance and length-scale (feet) of the smoothness prior."""

    variance: float = 1.0
    length_scale: float = 5.0

    def __post_init__(self):
        if self.variance <= 0 or self.length_scale <= 0:
            raise ValueError("variance and length_scale must be positive")


@dataclass(eq=False)
class CovFactor:
    """Lower Cholesky factor of the covariance matrix plus diagonal jitter.

    Immutable by convention: a factor may be shared across concurrent fits.
    """

    lower: np.ndarray
    jitter: float
    dim: int


def squared_exponential(xi, xj, hyper: KernelHyper):
    """Covariance sigma^2 exp(-0.5 ||xi - xj||^2 / phi^2) between two points.

    Accepts single points of shape (2,) or broadcastable stacks (..., 2).
    """
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    d2 = ((xi - xj) ** 2).sum(axis=-1)
    out = hyper.variance * np.exp(-0.5 * d2 / hyper.length_scale**2)
    return float(out) if np.ndim(out) == 0 else out


def build_cov_factor(
    grid: CourtGrid, hyper: KernelHyper, jitter: float | None = None
) -> CovFactor:
    """Assemble the covariance over tile centers and factorize it.

    Jitter (default 1e-6 * variance) is added to the diagonal; a failed
    factorization retries with jitter scaled by 10, up to 3 times.
    """
    if jitter is None:
        jitter = 1e-6 * hyper.variance
    if jitter <= 0:
        raise ValueError("jitter must be positive")
    centers = grid.tile_centers()
    cov = backend.sq_exp_matrix(
        np.ascontiguousarray(centers[:, 0]),
        np.ascontiguousarray(centers[:, 1]),
        hyper.variance,
        hyper.length_scale,
    )
    v = grid.n_tiles
    current = jitter
    for attempt in range(4):
        try:
            lower = np.linalg.cholesky(cov + current * np.eye(v))
            return CovFactor(lower=lower, jitter=current, dim=v)
        except np.linalg.LinAlgError:
            if attempt < 3:
                current *= 10.0
    raise np.linalg.LinAlgError(
        f"covariance not positive definite even with jitter {current}"
    )


def sample_field(factor: CovFactor, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean Gaussian field draw with covariance L L^T."""
    return factor.lower @ rng.standard_normal(factor.dim)

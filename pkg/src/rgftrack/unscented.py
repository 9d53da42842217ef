"""Scaled unscented transform.

2N+1 sigma points with the canonical scaling lambda = alpha^2 (N+kappa) - N;
points are mu and mu +/- the columns of sqrt((N+lambda) Sigma).  The
transform is exact for affine maps.  Tracking uses alpha=1, beta=2, kappa=0.
"""

from typing import NamedTuple

import numpy as np

from .gaussians import cholesky_sqrt


class UTParams(NamedTuple):
    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0


class SigmaPointSet(NamedTuple):
    points: np.ndarray  # (2N+1, N); points[0] is the source mean
    w_mean: np.ndarray  # (2N+1,)
    w_cov: np.ndarray   # (2N+1,)


def generate_sigma_points(belief, params=UTParams()):
    """Sigma points and weights for a Gaussian belief.

    This is the only place the filter takes an O(N^3) matrix square root.
    """
    mean = np.asarray(belief.mean, dtype=float)
    n = mean.shape[0]
    lam = params.alpha ** 2 * (n + params.kappa) - n
    scaled = cholesky_sqrt((n + lam) * np.asarray(belief.cov, dtype=float))
    points = np.empty((2 * n + 1, n))
    points[0] = mean
    points[1:n + 1] = mean + scaled.T
    points[n + 1:] = mean - scaled.T
    w_mean = np.full(2 * n + 1, 0.5 / (n + lam))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (n + lam)
    w_cov[0] = w_mean[0] + 1.0 - params.alpha ** 2 + params.beta
    return SigmaPointSet(points, w_mean, w_cov)


def _as_cols(samples):
    arr = np.asarray(samples, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def empirical_mean(samples, w_mean):
    """Weighted sample mean; samples (K,) or (K, D)."""
    return np.asarray(w_mean, dtype=float) @ np.asarray(samples, dtype=float)


def empirical_cov(samples_a, samples_b, mean_a, mean_b, w_cov):
    """Weighted sample (cross-)covariance matrix.

    Returns a (Da, Db) matrix (1-D sample arrays count as one column).  When
    both sample arrays are the same object the result is symmetrized.
    """
    dev_a = _as_cols(samples_a) - np.atleast_1d(np.asarray(mean_a, dtype=float))
    dev_b = _as_cols(samples_b) - np.atleast_1d(np.asarray(mean_b, dtype=float))
    cov = (np.asarray(w_cov, dtype=float)[:, None] * dev_a).T @ dev_b
    if samples_a is samples_b:
        cov = 0.5 * (cov + cov.T)
    return cov

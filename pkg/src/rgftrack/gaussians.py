"""Gaussian belief algebra shared by every filter in the package.

Beliefs are plain mean/covariance pairs over small state vectors; all the
heavy per-pixel work lives in :mod:`rgftrack.backend`.  Covariance repair is
deliberately conservative: a diagonal jitter schedule relative to the trace,
escalating by decades, and a hard failure once it is exhausted.
"""

from typing import NamedTuple

import numpy as np

# Number of cholesky_sqrt calls so far.  The factorized update is supposed to
# need exactly one O(N^3) matrix square root per measurement update; tests
# snapshot this counter around an update to prove it.
CHOLESKY_CALLS = 0

JITTER_REL_MIN = 1e-12
JITTER_REL_MAX = 1e-6


class NotPositiveDefinite(Exception):
    """Covariance stayed non-PD through the whole jitter schedule."""


class SingularInnovationCovariance(Exception):
    """The innovation covariance cannot be factorized; the belief is corrupted."""


class GaussianBelief(NamedTuple):
    mean: np.ndarray  # (N,)
    cov: np.ndarray   # (N, N)


class JointGaussian(NamedTuple):
    """Joint Gaussian over a state block x and an observation block y."""

    mean_x: np.ndarray  # (Nx,)
    mean_y: np.ndarray  # (Ny,)
    cov_xx: np.ndarray  # (Nx, Nx)
    cov_xy: np.ndarray  # (Nx, Ny)
    cov_yy: np.ndarray  # (Ny, Ny)


def _chol_jittered(cov):
    """Lower Cholesky factor, retrying with escalating diagonal jitter.

    Jitter starts at 1e-12 * trace/N and grows by factors of 10 up to
    1e-6 * trace/N; beyond that the matrix is declared not repairable.
    """
    n = cov.shape[0]
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.trace(cov)) / n
    lam = JITTER_REL_MIN * scale
    while lam > 0.0 and lam <= JITTER_REL_MAX * scale * (1.0 + 1e-15):
        try:
            return np.linalg.cholesky(cov + lam * np.eye(n))
        except np.linalg.LinAlgError:
            lam *= 10.0
    raise NotPositiveDefinite(
        f"covariance not positive definite after jitter schedule (trace={np.trace(cov):g})"
    )


def cholesky_sqrt(cov):
    """Lower-triangular L with L @ L.T equal to the (possibly jittered) input."""
    global CHOLESKY_CALLS
    CHOLESKY_CALLS += 1
    return _chol_jittered(np.asarray(cov, dtype=float))


def symmetrize_psd(cov):
    """Symmetrize and clamp negative eigenvalues to zero."""
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.size == 0 or vals[0] >= 0.0:
        return sym
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T


def condition(joint, y_obs):
    """Exact conditioning of a joint Gaussian on y = y_obs.

    mean = mu_x + S_xy S_yy^-1 (y - mu_y)
    cov  = S_xx - S_xy S_yy^-1 S_yx
    """
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    cov_xy = np.atleast_2d(np.asarray(joint.cov_xy, dtype=float))
    cov_yy = np.atleast_2d(np.asarray(joint.cov_yy, dtype=float))
    try:
        low = _chol_jittered(cov_yy)
    except NotPositiveDefinite as exc:
        raise SingularInnovationCovariance(str(exc)) from None
    low_inv = np.linalg.inv(low)
    gain = cov_xy @ (low_inv.T @ low_inv)  # S_xy S_yy^-1
    mean = joint.mean_x + gain @ (y_obs - joint.mean_y)
    cov = symmetrize_psd(joint.cov_xx - gain @ cov_xy.T)
    return GaussianBelief(mean, cov)


def check_belief(belief, tol=1e-9):
    """Assert the belief invariants: symmetric, eigenvalues >= -tol * max."""
    cov = np.asarray(belief.cov, dtype=float)
    denom = max(np.linalg.norm(cov), np.finfo(float).tiny)
    asym = np.linalg.norm(cov - cov.T) / denom
    if asym > tol:
        raise AssertionError(f"covariance asymmetric: {asym:g}")
    vals = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if vals[0] < -tol * max(vals[-1], np.finfo(float).tiny):
        raise AssertionError(f"covariance indefinite: min eig {vals[0]:g}")
    if not np.all(np.isfinite(belief.mean)) or not np.all(np.isfinite(cov)):
        raise AssertionError("belief contains non-finite values")

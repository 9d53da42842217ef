"""Gaussian belief algebra: conditioning oracle, jitter repair, invariants."""

import numpy as np
import pytest

from rgftrack import gaussians
from rgftrack.gaussians import (GaussianBelief, JointGaussian, NotPositiveDefinite,
                                SingularInnovationCovariance, check_belief,
                                cholesky_sqrt, condition, symmetrize_psd)

from conftest import rand_spd


def _random_joint(rng, nx, ny):
    """Joint over (x, y) with y = Hx + b + noise, guaranteeing a consistent
    (hence PD) joint covariance."""
    cov_xx = rand_spd(rng, nx)
    h = rng.standard_normal((ny, nx))
    noise = rand_spd(rng, ny, 0.1)
    mean_x = rng.standard_normal(nx)
    b = rng.standard_normal(ny)
    return JointGaussian(mean_x, h @ mean_x + b, cov_xx, cov_xx @ h.T,
                         h @ cov_xx @ h.T + noise), h, b, noise


def test_condition_matches_direct_inverse_formula():
    rng = np.random.default_rng(10)
    for _ in range(50):
        nx, ny = rng.integers(1, 9), rng.integers(1, 7)
        joint, _, _, _ = _random_joint(rng, nx, ny)
        y = rng.standard_normal(ny)
        got = condition(joint, y)
        # independent route: explicit matrix inverse
        gain = joint.cov_xy @ np.linalg.inv(joint.cov_yy)
        mean = joint.mean_x + gain @ (y - joint.mean_y)
        cov = joint.cov_xx - gain @ joint.cov_xy.T
        assert np.allclose(got.mean, mean, atol=1e-9)
        assert np.allclose(got.cov, cov, atol=1e-9)
        check_belief(got)


def test_condition_matches_kalman_update():
    # textbook Kalman posterior, derived without the joint-Gaussian detour
    rng = np.random.default_rng(11)
    for _ in range(20):
        nx, ny = 5, 3
        joint, h, b, noise = _random_joint(rng, nx, ny)
        y = rng.standard_normal(ny)
        s = h @ joint.cov_xx @ h.T + noise
        k = joint.cov_xx @ h.T @ np.linalg.inv(s)
        mean = joint.mean_x + k @ (y - h @ joint.mean_x - b)
        cov = joint.cov_xx - k @ h @ joint.cov_xx
        got = condition(joint, y)
        assert np.allclose(got.mean, mean, atol=1e-9)
        assert np.allclose(got.cov, cov, atol=1e-9)


def test_condition_scalar_observation():
    joint = JointGaussian(np.zeros(2), np.zeros(1), np.eye(2),
                          np.array([[0.5], [0.0]]), np.array([[2.0]]))
    post = condition(joint, 4.0)
    assert np.allclose(post.mean, [1.0, 0.0])
    assert np.allclose(post.cov, [[1.0 - 0.125, 0.0], [0.0, 1.0]])


def test_condition_rejects_singular_innovation():
    joint = JointGaussian(np.zeros(2), np.zeros(2), np.eye(2),
                          np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(SingularInnovationCovariance):
        condition(joint, np.zeros(2))


def test_cholesky_sqrt_reconstructs_and_counts():
    rng = np.random.default_rng(12)
    cov = rand_spd(rng, 6)
    before = gaussians.CHOLESKY_CALLS
    low = cholesky_sqrt(cov)
    assert gaussians.CHOLESKY_CALLS == before + 1
    assert np.allclose(low @ low.T, cov, atol=1e-10)
    assert np.allclose(low, np.tril(low))


def test_jitter_schedule_repairs_rank_deficient():
    v = np.array([1.0, 2.0, -1.0])
    cov = np.outer(v, v)  # PSD, rank 1
    low = cholesky_sqrt(cov)
    rel = np.abs(low @ low.T - cov).max() / np.trace(cov)
    assert rel < 1e-5  # jitter stays within the schedule ceiling


def test_jitter_schedule_gives_up_on_indefinite():
    cov = np.diag([1.0, 1.0, -0.5])
    with pytest.raises(NotPositiveDefinite):
        cholesky_sqrt(cov)


def test_symmetrize_psd():
    rng = np.random.default_rng(13)
    a = rng.standard_normal((5, 5))
    sym = symmetrize_psd(a)
    assert np.allclose(sym, sym.T)
    assert np.linalg.eigvalsh(sym).min() >= -1e-12
    # PSD input passes through (up to exact symmetrization)
    cov = rand_spd(rng, 5)
    assert np.allclose(symmetrize_psd(cov), cov, atol=1e-12)
    # indefinite input has its negative directions clamped, not reflected
    clamped = symmetrize_psd(np.diag([2.0, -1.0]))
    assert np.allclose(clamped, np.diag([2.0, 0.0]), atol=1e-14)


def test_check_belief_rejects_bad_covariances():
    good = GaussianBelief(np.zeros(3), np.eye(3))
    check_belief(good)
    with pytest.raises(AssertionError):
        check_belief(GaussianBelief(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]])))
    with pytest.raises(AssertionError):
        check_belief(GaussianBelief(np.zeros(2), np.diag([1.0, -1.0])))
    with pytest.raises(AssertionError):
        check_belief(GaussianBelief(np.array([np.nan, 0.0]), np.eye(2)))

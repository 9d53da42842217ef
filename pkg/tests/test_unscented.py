"""Scaled unscented transform: weights, round-trips, affine exactness."""

import numpy as np

from rgftrack.gaussians import GaussianBelief
from rgftrack.unscented import (UTParams, empirical_cov, empirical_mean,
                                generate_sigma_points)

from conftest import rand_spd


def test_weights_at_tracking_operating_point():
    # alpha=1, beta=2, kappa=0 -> lambda=0: center point has zero mean weight
    # and covariance weight 2; the remaining 2N points share 1/(2N) each
    n = 12
    sigma = generate_sigma_points(GaussianBelief(np.zeros(n), np.eye(n)), UTParams())
    assert sigma.points.shape == (2 * n + 1, n)
    assert sigma.w_mean[0] == 0.0
    assert sigma.w_cov[0] == 2.0
    assert np.allclose(sigma.w_mean[1:], 1.0 / (2 * n))
    assert np.allclose(sigma.w_cov[1:], 1.0 / (2 * n))
    assert abs(sigma.w_mean.sum() - 1.0) < 1e-15


def test_center_point_is_the_mean():
    rng = np.random.default_rng(20)
    mean = rng.standard_normal(7)
    sigma = generate_sigma_points(GaussianBelief(mean, rand_spd(rng, 7)))
    assert np.array_equal(sigma.points[0], mean)


def test_sigma_point_round_trip():
    rng = np.random.default_rng(21)
    for params in (UTParams(), UTParams(alpha=0.5), UTParams(alpha=1.0, kappa=3.0)):
        for _ in range(30):
            n = int(rng.integers(1, 13))
            belief = GaussianBelief(rng.standard_normal(n), rand_spd(rng, n))
            sigma = generate_sigma_points(belief, params)
            mean = empirical_mean(sigma.points, sigma.w_mean)
            cov = empirical_cov(sigma.points, sigma.points, mean, mean, sigma.w_cov)
            assert np.allclose(mean, belief.mean, atol=1e-9)
            assert np.abs(cov - belief.cov).max() < 1e-9 * max(1.0, np.abs(belief.cov).max())


def test_affine_pushforward_is_exact():
    rng = np.random.default_rng(22)
    for _ in range(30):
        n, m = int(rng.integers(1, 13)), int(rng.integers(1, 8))
        belief = GaussianBelief(rng.standard_normal(n), rand_spd(rng, n))
        a = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
        sigma = generate_sigma_points(belief)
        y = sigma.points @ a.T + b
        mu_y = empirical_mean(y, sigma.w_mean)
        s_yy = empirical_cov(y, y, mu_y, mu_y, sigma.w_cov)
        s_xy = empirical_cov(sigma.points, y, belief.mean, mu_y, sigma.w_cov)
        scale = max(1.0, np.abs(belief.cov).max(), np.abs(a).max() ** 2)
        assert np.allclose(mu_y, a @ belief.mean + b, atol=1e-9 * scale)
        assert np.abs(s_yy - a @ belief.cov @ a.T).max() < 1e-9 * scale
        assert np.abs(s_xy - belief.cov @ a.T).max() < 1e-9 * scale


def test_empirical_helpers_on_1d_samples():
    w = np.array([0.25, 0.25, 0.25, 0.25])
    samples = np.array([1.0, 2.0, 3.0, 4.0])
    assert empirical_mean(samples, w) == 2.5
    cov = empirical_cov(samples, samples, 2.5, 2.5, w)
    assert cov.shape == (1, 1)
    assert np.isclose(cov[0, 0], 1.25)


def test_empirical_cov_symmetrizes_same_object_only():
    rng = np.random.default_rng(23)
    a = rng.standard_normal((9, 4))
    w = rng.random(9)
    cov = empirical_cov(a, a, np.zeros(4), np.zeros(4), w)
    assert np.array_equal(cov, cov.T)
    b = a.copy()  # equal values, different object: cross-covariance path
    cross = empirical_cov(a, b, np.zeros(4), np.zeros(4), w)
    want = (w[:, None] * a).T @ b
    assert np.allclose(cross, want, atol=1e-12)

"""Baseline filters the robust tracker is compared against.

* dense_gf_update: one joint Gaussian over the whole observation vector,
  then exact conditioning.  O(N^3 + M^3); oracle/small-M use only.
* sequential_gf_update: classic per-pixel conditioning; sigma points must be
  re-derived after every pixel because the belief changes, O(M N^3), and the
  loop is inherently serial.
* particle filter: bootstrap PF with the same mesh ray caster and mixture
  measurement model, systematic resampling at ESS < P/2.

On affine-Gaussian observation models the dense, sequential and factorized
updates agree exactly (up to roundoff); tests pin that three-way equality.
"""

from typing import NamedTuple

import numpy as np

from .depthmodel import gate_range, ray_grid, raycast_t
from .gaussians import GaussianBelief, JointGaussian, condition
from .rotations import quat_normalize
from .state import (DO, DR, STATE_DIM, DefaultPose, apply_state_to_pose,
                    transition_matrix)
from .unscented import UTParams, empirical_cov, empirical_mean, generate_sigma_points


def _noise_matrix(noise_cov, m):
    noise_cov = np.asarray(noise_cov, dtype=float)
    if noise_cov.ndim == 0:
        return noise_cov * np.eye(m)
    if noise_cov.ndim == 1:
        return np.diag(noise_cov)
    return noise_cov


def dense_gf_update(prior, obs_fn, y_obs, noise_cov, ut=UTParams()):
    """Gaussian-filter update with one dense joint over all M observations.

    obs_fn maps sigma states (K, N) to predicted observations (K, M);
    noise_cov (scalar, diagonal or full) is added to the propagated
    observation covariance.
    """
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    sigma = generate_sigma_points(prior, ut)
    yk = np.asarray(obs_fn(sigma.points), dtype=float)
    if yk.ndim == 1:
        yk = yk[:, None]
    mu_y = empirical_mean(yk, sigma.w_mean)
    s_yy = empirical_cov(yk, yk, mu_y, mu_y, sigma.w_cov) + _noise_matrix(noise_cov, yk.shape[1])
    s_xy = empirical_cov(sigma.points, yk, prior.mean, mu_y, sigma.w_cov)
    joint = JointGaussian(np.asarray(prior.mean, dtype=float), mu_y,
                          np.asarray(prior.cov, dtype=float), s_xy, s_yy)
    return condition(joint, y_obs)


def sequential_gf_update(prior, pixel_fn, y_obs, noise_var, ut=UTParams()):
    """Per-pixel Gaussian-filter conditioning.

    pixel_fn(i, states) -> (K,) predicted value of pixel i at the sigma
    states.  After each pixel the belief changes, so the sigma points are
    re-derived from scratch — this is what makes the baseline O(M N^3).
    """
    y_obs = np.atleast_1d(np.asarray(y_obs, dtype=float))
    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float), y_obs.shape)
    belief = prior
    for i in range(y_obs.shape[0]):
        sigma = generate_sigma_points(belief, ut)
        yk = np.asarray(pixel_fn(i, sigma.points), dtype=float)
        mu = float(empirical_mean(yk, sigma.w_mean))
        s_yy = empirical_cov(yk, yk, mu, mu, sigma.w_cov) + noise_var[i]
        s_xy = empirical_cov(sigma.points, yk, belief.mean, mu, sigma.w_cov)
        joint = JointGaussian(np.asarray(belief.mean, dtype=float), np.atleast_1d(mu),
                              np.asarray(belief.cov, dtype=float), s_xy, np.atleast_2d(s_yy))
        belief = condition(joint, y_obs[i:i + 1])
    return belief


class ParticleSet(NamedTuple):
    """Bootstrap particle cloud over absolute poses plus velocities.

    Pose increments are folded into the per-particle anchors after every
    propagation, so states carry zero pose blocks between steps.
    """

    states: np.ndarray     # (P, 12)
    anchors_r: np.ndarray  # (P, 3)
    anchors_q: np.ndarray  # (P, 4)
    weights: np.ndarray    # (P,) normalized
    rng: np.random.Generator
    degenerate: bool = False


def init_particles(pose, sigmas, count, seed):
    """Scatter particles around a pose; sigmas = (r, o, v, omega) stds."""
    rng = np.random.default_rng(seed)
    sigma_r, sigma_o, sigma_v, sigma_w = sigmas
    states = np.zeros((count, STATE_DIM))
    states[:, 6:9] = sigma_v * rng.standard_normal((count, 3))
    states[:, 9:12] = sigma_w * rng.standard_normal((count, 3))
    deltas = np.zeros((count, STATE_DIM))
    deltas[:, DR] = sigma_r * rng.standard_normal((count, 3))
    deltas[:, DO] = sigma_o * rng.standard_normal((count, 3))
    anchors_r = np.empty((count, 3))
    anchors_q = np.empty((count, 4))
    for i in range(count):
        p = apply_state_to_pose(pose, deltas[i])
        anchors_r[i] = p.r
        anchors_q[i] = p.q
    return ParticleSet(states, anchors_r, anchors_q,
                       np.full(count, 1.0 / count), rng, False)


def _fold_poses(particles, states):
    count = states.shape[0]
    anchors_r = np.empty((count, 3))
    anchors_q = np.empty((count, 4))
    for i in range(count):
        pose = apply_state_to_pose(
            DefaultPose(particles.anchors_r[i], particles.anchors_q[i]), states[i])
        anchors_r[i] = pose.r
        anchors_q[i] = pose.q
    states = states.copy()
    states[:, DR] = 0.0
    states[:, DO] = 0.0
    return states, anchors_r, anchors_q


def _log_likelihood(y, predicted, params):
    """Sum of per-pixel log mixture densities; misses fall back to the tail."""
    tail = params.tail_value()
    out = np.full(y.shape, np.log(tail))
    hit = np.isfinite(predicted)
    if hit.any():
        z = y[hit] - predicted[hit]
        var = params.noise_std ** 2
        body = np.exp(-0.5 * z * z / var) / np.sqrt(2.0 * np.pi * var)
        out[hit] = np.log((1.0 - params.tail_weight) * body + params.tail_weight * tail)
    return float(out.sum())


def systematic_resample(weights, rng):
    """Indices drawn by systematic (stratified comb) resampling."""
    count = weights.shape[0]
    positions = (rng.random() + np.arange(count)) / count
    return np.searchsorted(np.cumsum(weights), positions)


def pf_step(particles, image, mesh, camera, params, noise):
    """One bootstrap PF step: propagate, reweight, maybe resample.

    Weighting uses the same ray caster and mixture density as the robust
    filter so comparisons isolate the filtering method.  All randomness
    comes from the generator carried in the set, so a fixed seed gives
    bit-identical runs.
    """
    rng = particles.rng
    count = particles.states.shape[0]

    # propagate: pose blocks integrate velocities, velocities random-walk
    a = transition_matrix()
    states = particles.states @ a.T
    states[:, 6:9] += noise.sigma_v * rng.standard_normal((count, 3))
    states[:, 9:12] += noise.sigma_omega * rng.standard_normal((count, 3))
    states, anchors_r, anchors_q = _fold_poses(particles, states)

    y = np.asarray(image.depth, dtype=float).reshape(-1)
    valid = np.isfinite(y) & (y >= camera.range_min) & (y <= camera.range_max)
    dirs = ray_grid(camera)[valid]
    y_valid = y[valid]

    log_w = np.empty(count)
    for i in range(count):
        pose = DefaultPose(anchors_r[i], anchors_q[i])
        predicted = gate_range(raycast_t(mesh, pose, dirs), camera)
        log_w[i] = _log_likelihood(y_valid, predicted, params)

    degenerate = False
    max_log = log_w.max() if count else -np.inf
    if not np.isfinite(max_log):
        weights = np.full(count, 1.0 / count)
        degenerate = True
    else:
        weights = particles.weights * np.exp(log_w - max_log)
        total = weights.sum()
        if total <= 0.0 or not np.isfinite(total):
            weights = np.full(count, 1.0 / count)
            degenerate = True
        else:
            weights = weights / total

    ess = 1.0 / float(weights @ weights)
    if ess < 0.5 * count:
        idx = systematic_resample(weights, rng)
        states = states[idx]
        anchors_r = anchors_r[idx]
        anchors_q = anchors_q[idx]
        weights = np.full(count, 1.0 / count)

    return ParticleSet(states, anchors_r, anchors_q, weights, rng, degenerate)


def particle_estimate(particles):
    """Weighted mean pose (quaternions sign-aligned before averaging)."""
    w = particles.weights
    r = w @ particles.anchors_r
    q_ref = particles.anchors_q[int(np.argmax(w))]
    qs = particles.anchors_q * np.where(particles.anchors_q @ q_ref < 0.0, -1.0, 1.0)[:, None]
    return DefaultPose(r, quat_normalize(w @ qs))

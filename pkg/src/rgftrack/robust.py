"""Robust per-pixel measurement update in information form.

Each pixel measurement y is replaced by a bounded 3-component feature

    phi(y) = [ b, y b, t ] / ((1 - w) b + w t),

where b is the Gaussian body density of y under the predicted per-pixel
depth distribution and t the uniform tail density.  Deep-tail measurements
saturate at (0, 0, 1/w), so outliers shift the posterior by a vanishing
amount instead of dragging it.  With w == 0 the feature degrades to the raw
measurement embedding (1, y, 0) and the update is the plain Gaussian filter.

Per pixel, the feature is fitted with an affine observation model
phi ~ l + L x + noise(P) from the sigma points, and all pixels are folded
into the prior at once through an information matrix/vector pair (D, d):

    D += L^T P^-1 L
    d += L^T P^-1 (phi_obs - l - L mu_x)
    Sigma_post = (Sigma_xx^-1 + D)^-1,  mu_post = mu_x + Sigma_post d

which costs O(M N^2 + N^3) overall and needs the sigma-point square root
exactly once per update.
"""

from typing import NamedTuple

import numpy as np

from . import backend
from .depthmodel import gate_range, ray_grid, raycast_t
from .gaussians import GaussianBelief, symmetrize_psd
from .state import apply_state_to_pose
from .unscented import UTParams, empirical_cov, empirical_mean, generate_sigma_points

# Clamp on log(tail/body) before exponentiation.  Keeps the w == 0 path
# finite under extreme outliers; for w >= 1e-8 the feature still saturates
# to better than 1e-9 because w * e^100 dominates the denominator.
LOG_RATIO_MAX = 100.0
# Relative eigenvalue floor applied to the per-pixel noise covariance P,
# scaled by P's own trace.  With the 3-node noise rule each state's
# conditional feature covariance has rank <= 2, so P routinely has one
# near-null direction holding nothing but accumulated roundoff; the floor
# must dominate that junk without measurably shifting the real directions.
P_FLOOR_REL = 1e-9

# 3-node Gauss-Hermite rule (in noise-std units) marginalizing the sensor
# noise per sigma state.  The feature is a function of the noisy measurement,
# so its moments must integrate over the body noise, not just the state
# spread; by the law of total covariance the per-state conditional feature
# covariance is averaged into Sigma_phiphi.  Exact for features affine in y,
# which makes the w == 0 path coincide with the Kalman update.
NOISE_NODES = np.array([0.0, np.sqrt(3.0), -np.sqrt(3.0)])
NOISE_WEIGHTS = np.array([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0])


class SingularPixelCovariance(Exception):
    """Per-pixel feature noise covariance is not invertible."""


class PixelBodyMoments(NamedTuple):
    mu: float   # predicted depth mean under the prior
    var: float  # predicted depth variance, sensor noise included


class PixelLinearModel(NamedTuple):
    l: np.ndarray  # (F,) feature offset
    L: np.ndarray  # (F, N) feature sensitivity to the state
    P: np.ndarray  # (F, F) residual feature covariance (floored)


class InfoAccumulator(NamedTuple):
    D: np.ndarray  # (N, N)
    d: np.ndarray  # (N,)


class UpdateResult(NamedTuple):
    belief: GaussianBelief
    used_pixels: int
    skipped_pixels: int
    reverted: bool  # True when no pixel contributed and the prior was kept


def new_accumulator(n):
    return InfoAccumulator(np.zeros((n, n)), np.zeros(n))


def pixel_body_moments(depth_sigma, w_mean, w_cov, noise_var):
    """Moments of the inlier depth model under the prior belief.

    depth_sigma holds the predicted depth at every sigma state, NaN where
    that state's ray missed the object.  The body describes the surface
    depth where it is visible, so its moments condition on the hitting
    states; the sensor noise variance is added on top of that spread.  If
    only zero-weight states hit, the mean-state depth stands in.
    """
    depth_sigma = np.asarray(depth_sigma, dtype=float)
    w_mean = np.asarray(w_mean, dtype=float)
    w_cov = np.asarray(w_cov, dtype=float)
    hit = np.isfinite(depth_sigma)
    wm = np.where(hit, w_mean, 0.0)
    wm_sum = float(wm.sum())
    if wm_sum > 0.0:
        mu = float(wm @ np.where(hit, depth_sigma, 0.0)) / wm_sum
    else:
        mu = float(depth_sigma[0])
    dev = np.where(hit, depth_sigma - mu, 0.0)
    var = float(w_cov @ (dev * dev)) + noise_var
    return PixelBodyMoments(mu, var)


def feature(y, moments, params):
    """Bounded measurement feature; scalar y -> (3,), batched y -> (..., 3).

    Deep-tail measurements (body density underflowing against the tail)
    saturate at (0, 0, 1/w).  With params.tail_weight == 0 the robust path is
    disabled and the embedding is (1, y, 0).
    """
    w = params.tail_weight
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape + (3,))
    if w == 0.0:
        out[..., 0] = 1.0
        out[..., 1] = y
        out[..., 2] = 0.0
        return out
    z = y - moments.mu
    log_body = -0.5 * (z * z) / moments.var - 0.5 * np.log(2.0 * np.pi * moments.var)
    rho = np.exp(np.minimum(np.log(params.tail_value()) - log_body, LOG_RATIO_MAX))
    denom = (1.0 - w) + w * rho
    out[..., 0] = 1.0 / denom
    out[..., 1] = y / denom
    out[..., 2] = rho / denom
    return out


def feature_samples(depth_sigma, moments, params):
    """Features of the noisy measurement at every (sigma state, noise node).

    Missing states (NaN) predict range_max, which saturates against a
    hit-conditioned body.  Returns (K, 3, 3): for each predicted depth, the
    feature evaluated at the three body-noise quadrature offsets.
    """
    d = np.asarray(depth_sigma, dtype=float)
    d = np.where(np.isfinite(d), d, params.range_max)
    y = d[:, None] + params.noise_std * NOISE_NODES
    return feature(y, moments, params)


def pixel_joint_moments(x_sigma, feature_sigma, w_mean, w_cov, prior_mean,
                        params=None):
    """Joint (x, phi) moments of one pixel.

    feature_sigma is (K, F) plain per-state features, or (K, J, F) with J
    noise-quadrature nodes per state; in the latter case Sigma_phiphi gains
    the node-averaged conditional covariance (law of total covariance).

    When params carries a nonzero tail weight, the per-state feature
    distribution is the full measurement mixture: with probability w the
    measurement comes from the tail, whose feature saturates at (0, 0, 1/w)
    up to a window of width O(noise_std / sensor range).  The tail mass is
    what lets an observed outlier be explained as noise instead of pulling
    the state.  Returns (mu_phi, s_ff, s_xf).
    """
    phi = np.asarray(feature_sigma, dtype=float)
    if phi.ndim == 2:
        phi = phi[:, None, :]
        node_w = np.ones(1)
    else:
        node_w = NOISE_WEIGHTS
    phi_bar = np.einsum('j,kjf->kf', node_w, phi)
    cond = phi - phi_bar[:, None, :]
    c_mean = np.einsum('k,j,kjf,kjg->fg', np.asarray(w_mean, dtype=float), node_w,
                       cond, cond)
    w = 0.0 if params is None else params.tail_weight
    if w > 0.0:
        # Mixture of the body-marginal feature (mean phi_bar, cov from cond)
        # and the constant saturated tail feature tau.
        tau = np.array([0.0, 0.0, 1.0 / w])
        dev = phi_bar - tau
        c_mean = (1.0 - w) * c_mean + (w * (1.0 - w)) * np.einsum(
            'k,kf,kg->fg', np.asarray(w_mean, dtype=float), dev, dev)
        phi_bar = (1.0 - w) * phi_bar + w * tau
    mu_phi = empirical_mean(phi_bar, w_mean)
    s_ff = empirical_cov(phi_bar, phi_bar, mu_phi, mu_phi, w_cov) + c_mean
    s_xf = empirical_cov(x_sigma, phi_bar, prior_mean, mu_phi, w_cov)
    return mu_phi, 0.5 * (s_ff + s_ff.T), s_xf


def pixel_linear_model(x_sigma, feature_sigma, w_mean, w_cov, prior, params=None):
    """Affine fit phi ~ l + L x + noise(P) of a pixel's feature.

    P is the Schur complement (conditional feature covariance), symmetrized
    and floored at P_FLOOR_REL * trace(P) to stay invertible in degenerate
    directions.
    """
    mu_phi, s_ff, s_xf = pixel_joint_moments(x_sigma, feature_sigma, w_mean, w_cov,
                                             prior.mean, params)
    b = np.linalg.solve(prior.cov, s_xf)          # Sigma_xx^-1 Sigma_xphi
    big_l = b.T
    l = mu_phi - big_l @ np.asarray(prior.mean, dtype=float)
    p = s_ff - s_xf.T @ b
    p = 0.5 * (p + p.T)
    p += (P_FLOOR_REL * max(np.trace(p), 0.0)) * np.eye(len(mu_phi))
    return PixelLinearModel(np.atleast_1d(l), np.atleast_2d(big_l), p)


def accumulate(acc, model, phi_obs, prior_mean):
    """Add one pixel's information contribution.

    The innovation is the observed feature minus the model's prediction at
    the prior mean, l + L mu.  Contributions are additive and commute, so
    pixel order does not matter and partial sums can be merged.
    """
    if not (np.all(np.isfinite(model.P)) and np.all(np.isfinite(model.L))):
        raise SingularPixelCovariance("non-finite pixel model")
    try:
        pinv_l = np.linalg.solve(model.P, model.L)   # P^-1 L
        pinv_innov = np.linalg.solve(
            model.P, np.asarray(phi_obs, dtype=float) - (model.l + model.L @ prior_mean))
    except np.linalg.LinAlgError as exc:
        raise SingularPixelCovariance(str(exc)) from None
    return InfoAccumulator(acc.D + model.L.T @ pinv_l, acc.d + model.L.T @ pinv_innov)


def finalize(prior, acc):
    """Fold the accumulated information into the prior belief."""
    prec = np.linalg.inv(np.asarray(prior.cov, dtype=float))
    cov = symmetrize_psd(np.linalg.inv(prec + acc.D))
    mean = np.asarray(prior.mean, dtype=float) + cov @ acc.d
    return GaussianBelief(mean, cov)


def update_from_depths(prior, sigma, depths, y, params, impl=None):
    """Information-form update from precomputed per-pixel depth predictions.

    depths: (M, 2N+1) predicted depth for each usable pixel at every sigma
    state, NaN where that state's ray missed the object; y: (M,) measured
    depths.  Returns (belief, used, skipped) where skipped counts pixels
    dropped for a singular feature covariance.
    """
    depths = np.asarray(depths, dtype=float)
    xc = sigma.points - np.asarray(prior.mean, dtype=float)
    g = np.linalg.solve(np.asarray(prior.cov, dtype=float), xc.T).T
    big_d, small_d, used, skipped = backend.impl_for(impl).accumulate_info(
        depths, np.asarray(y, dtype=float), xc, g, sigma.w_mean, sigma.w_cov,
        params.noise_std ** 2, params.tail_weight, params.tail_value(),
        LOG_RATIO_MAX, P_FLOOR_REL, params.range_max)
    if used == 0:
        return prior, 0, skipped
    return finalize(prior, InfoAccumulator(big_d, small_d)), used, skipped


def update(prior, anchor, image, mesh, camera, params, ut=UTParams(), impl=None):
    """Measurement update of the tracked state from one depth image.

    Only pixels whose mean-state ray hits the object carry information;
    within that footprint, invalid sensor pixels and pixels with singular
    feature covariance are skipped and counted.  Sigma-state rays that miss
    predict range_max against a body conditioned on the hitting states, so
    silhouette pixels discriminate on-object from off-object poses.  When
    nothing usable remains the prior is returned unchanged with the
    `reverted` flag set.
    """
    sigma = generate_sigma_points(prior, ut)
    dirs = ray_grid(camera)
    y = np.asarray(image.depth, dtype=float).reshape(-1)
    if y.shape[0] != dirs.shape[0]:
        raise ValueError("depth image does not match the camera geometry")

    mean_pose = apply_state_to_pose(anchor, sigma.points[0])
    mean_depth = gate_range(raycast_t(mesh, mean_pose, dirs, impl=impl), camera)
    footprint = np.isfinite(mean_depth)
    valid = np.isfinite(y) & (y >= camera.range_min) & (y <= camera.range_max)
    use = footprint & valid
    sensor_skipped = int(np.count_nonzero(footprint & ~valid))
    if not use.any():
        return UpdateResult(prior, 0, sensor_skipped, True)

    sel = np.flatnonzero(use)
    sub_dirs = dirs[sel]
    depths = np.empty((sel.size, sigma.points.shape[0]))
    depths[:, 0] = mean_depth[sel]
    for k in range(1, sigma.points.shape[0]):
        pose = apply_state_to_pose(anchor, sigma.points[k])
        depths[:, k] = gate_range(raycast_t(mesh, pose, sub_dirs, impl=impl), camera)

    belief, used, singular_skipped = update_from_depths(
        prior, sigma, depths, y[sel], params, impl=impl)
    skipped = sensor_skipped + singular_skipped
    if used == 0:
        return UpdateResult(prior, 0, skipped, True)
    return UpdateResult(belief, used, skipped, False)

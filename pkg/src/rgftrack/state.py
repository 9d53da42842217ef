"""Tracked state: differential pose plus per-frame velocities (12-dim).

The belief lives in differential coordinates around a reference pose (the
anchor): position increment delta_r, orientation increment delta_o as a
rotation vector, and camera-frame velocities v / omega in per-frame units.
Orientation increments compose onto the anchor from the left, i.e. rotations
are applied in the camera frame:

    r = r0 + delta_r,   o = exp_quat(delta_o) * o0

Folding the posterior mean into the anchor after every update (re_zero)
keeps delta_o near zero, where the rotation-vector chart is well behaved.
"""

from typing import NamedTuple

import numpy as np

from .gaussians import GaussianBelief, symmetrize_psd
from .rotations import exp_quat, quat_multiply, quat_normalize

STATE_DIM = 12
DR = slice(0, 3)   # position increment [m]
DO = slice(3, 6)   # orientation increment, rotation vector [rad]
V = slice(6, 9)    # translational velocity [m/frame]
W = slice(9, 12)   # angular velocity [rad/frame]


class DefaultPose(NamedTuple):
    """Reference pose: object origin and object-to-camera rotation."""

    r: np.ndarray  # (3,) [m]
    q: np.ndarray  # (4,) unit quaternion, scalar first


class ProcessNoiseParams(NamedTuple):
    sigma_v: float = 0.001      # [m/frame]
    sigma_omega: float = 0.01   # [rad/frame]


def transition_matrix():
    """Constant-velocity transition: pose blocks integrate the velocities."""
    a = np.eye(STATE_DIM)
    a[DR, V] = np.eye(3)
    a[DO, W] = np.eye(3)
    return a


def process_noise_cov(noise=ProcessNoiseParams()):
    """Process noise enters the velocity blocks only."""
    q = np.zeros((STATE_DIM, STATE_DIM))
    q[V, V] = noise.sigma_v ** 2 * np.eye(3)
    q[W, W] = noise.sigma_omega ** 2 * np.eye(3)
    return q


def predict(belief, noise=ProcessNoiseParams()):
    """One-frame prediction; linear, so the moments are closed form."""
    a = transition_matrix()
    mean = a @ np.asarray(belief.mean, dtype=float)
    cov = a @ np.asarray(belief.cov, dtype=float) @ a.T + process_noise_cov(noise)
    return GaussianBelief(mean, symmetrize_psd(cov))


def apply_state_to_pose(anchor, state):
    """Absolute pose encoded by a state vector relative to the anchor."""
    state = np.asarray(state, dtype=float)
    r = np.asarray(anchor.r, dtype=float) + state[DR]
    q = quat_multiply(exp_quat(state[DO]), anchor.q)
    return DefaultPose(r, quat_normalize(q))


def re_zero(belief, anchor):
    """Fold the mean pose increments into the anchor.

    Returns (belief, anchor) with zeroed pose-increment means; the covariance
    is passed through untouched (same array object).
    """
    new_anchor = apply_state_to_pose(anchor, belief.mean)
    mean = np.array(belief.mean, dtype=float)
    mean[DR] = 0.0
    mean[DO] = 0.0
    return GaussianBelief(mean, belief.cov), new_anchor


def initial_belief(sigma_r, sigma_o, sigma_v, sigma_omega):
    """Zero-mean belief with independent per-block standard deviations."""
    scale = np.repeat([sigma_r, sigma_o, sigma_v, sigma_omega], 3)
    return GaussianBelief(np.zeros(STATE_DIM), np.diag(scale.astype(float) ** 2))

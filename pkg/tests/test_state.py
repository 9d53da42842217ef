"""Constant-velocity state model and anchor bookkeeping."""

import numpy as np

from rgftrack.gaussians import GaussianBelief
from rgftrack.rotations import exp_quat, quat_multiply, quat_to_matrix
from rgftrack.state import (DO, DR, STATE_DIM, V, W, DefaultPose,
                            ProcessNoiseParams, apply_state_to_pose,
                            initial_belief, predict, process_noise_cov,
                            re_zero, transition_matrix)

from conftest import rand_spd, tilted_pose


def test_transition_matrix_blocks():
    a = transition_matrix()
    assert a.shape == (STATE_DIM, STATE_DIM)
    want = np.eye(STATE_DIM)
    want[DR, V] = np.eye(3)
    want[DO, W] = np.eye(3)
    assert np.array_equal(a, want)


def test_process_noise_hits_velocity_blocks_only():
    q = process_noise_cov(ProcessNoiseParams(sigma_v=0.002, sigma_omega=0.05))
    want = np.zeros((STATE_DIM, STATE_DIM))
    want[V, V] = 0.002 ** 2 * np.eye(3)
    want[W, W] = 0.05 ** 2 * np.eye(3)
    assert np.array_equal(q, want)


def test_predict_matches_closed_form():
    rng = np.random.default_rng(30)
    belief = GaussianBelief(rng.standard_normal(STATE_DIM), rand_spd(rng, STATE_DIM))
    noise = ProcessNoiseParams(sigma_v=0.003, sigma_omega=0.02)
    out = predict(belief, noise)
    a = transition_matrix()
    assert np.allclose(out.mean, a @ belief.mean, atol=1e-12)
    want_cov = a @ belief.cov @ a.T + process_noise_cov(noise)
    assert np.abs(out.cov - want_cov).max() < 1e-9
    assert np.array_equal(out.cov, out.cov.T)
    assert np.allclose(out.mean[DR], belief.mean[DR] + belief.mean[V])
    assert np.allclose(out.mean[V], belief.mean[V])


def test_apply_zero_state_returns_anchor():
    anchor = tilted_pose()
    pose = apply_state_to_pose(anchor, np.zeros(STATE_DIM))
    assert np.allclose(pose.r, anchor.r, atol=1e-15)
    assert np.allclose(pose.q, anchor.q, atol=1e-15)


def test_apply_state_translation_and_left_rotation():
    anchor = tilted_pose()
    state = np.zeros(STATE_DIM)
    state[DR] = [0.01, -0.02, 0.005]
    state[DO] = [0.05, -0.1, 0.2]
    pose = apply_state_to_pose(anchor, state)
    assert np.allclose(pose.r, np.asarray(anchor.r) + state[DR], atol=1e-15)
    # delta rotation composes in the camera frame: R = R_delta @ R_anchor
    want = quat_to_matrix(exp_quat(state[DO])) @ quat_to_matrix(anchor.q)
    assert np.allclose(quat_to_matrix(pose.q), want, atol=1e-12)
    assert abs(np.linalg.norm(pose.q) - 1.0) < 1e-12


def test_re_zero_folds_mean_into_anchor():
    rng = np.random.default_rng(31)
    anchor = DefaultPose(np.array([0.1, -0.2, 1.0]), exp_quat([0.2, 0.0, -0.4]))
    mean = rng.standard_normal(STATE_DIM) * 0.05
    cov = rand_spd(rng, STATE_DIM)
    belief, new_anchor = re_zero(GaussianBelief(mean, cov), anchor)
    # the new anchor is exactly the old mean pose
    want = apply_state_to_pose(anchor, mean)
    assert np.allclose(new_anchor.r, want.r, atol=1e-15)
    assert np.allclose(new_anchor.q, want.q, atol=1e-15)
    assert np.array_equal(belief.mean[DR], np.zeros(3))
    assert np.array_equal(belief.mean[DO], np.zeros(3))
    # velocities survive, covariance is passed through untouched
    assert np.array_equal(belief.mean[V], mean[V])
    assert np.array_equal(belief.mean[W], mean[W])
    assert belief.cov is cov


def test_initial_belief_diagonal():
    belief = initial_belief(0.01, 0.03, 0.003, 0.01)
    assert np.array_equal(belief.mean, np.zeros(STATE_DIM))
    want = np.repeat([0.01, 0.03, 0.003, 0.01], 3) ** 2
    assert np.allclose(np.diag(belief.cov), want, atol=1e-18)
    assert np.array_equal(belief.cov, np.diag(np.diag(belief.cov)))

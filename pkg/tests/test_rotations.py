"""Quaternion algebra against scipy's Rotation as an independent oracle."""

import numpy as np
from scipy.spatial.transform import Rotation

from rgftrack.rotations import (exp_quat, quat_angle, quat_conjugate, quat_multiply,
                                quat_normalize, quat_to_matrix, rotate_points)


def _to_scipy(q):
    # wxyz (ours) -> xyzw (scipy)
    return Rotation.from_quat([q[1], q[2], q[3], q[0]])


def _random_quats(rng, count):
    q = rng.standard_normal((count, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def test_quat_normalize():
    q = quat_normalize(np.array([2.0, 0.0, 0.0, 0.0]))
    assert np.allclose(q, [1.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(0)
    for q in rng.standard_normal((20, 4)):
        assert abs(np.linalg.norm(quat_normalize(q)) - 1.0) < 1e-12


def test_quat_to_matrix_matches_scipy():
    rng = np.random.default_rng(1)
    for q in _random_quats(rng, 100):
        assert np.allclose(quat_to_matrix(q), _to_scipy(q).as_matrix(), atol=1e-12)


def test_quat_multiply_composes_rotations():
    rng = np.random.default_rng(2)
    for a, b in zip(_random_quats(rng, 100), _random_quats(rng, 100)):
        got = quat_to_matrix(quat_multiply(a, b))
        want = quat_to_matrix(a) @ quat_to_matrix(b)
        assert np.allclose(got, want, atol=1e-12)


def test_quat_conjugate_inverts():
    rng = np.random.default_rng(3)
    for q in _random_quats(rng, 50):
        assert np.allclose(quat_to_matrix(quat_multiply(q, quat_conjugate(q))),
                           np.eye(3), atol=1e-12)


def test_exp_quat_matches_scipy_rotvec():
    rng = np.random.default_rng(4)
    for v in rng.standard_normal((100, 3)) * rng.uniform(0.01, 3.0, (100, 1)):
        got = quat_to_matrix(exp_quat(v))
        want = Rotation.from_rotvec(v).as_matrix()
        assert np.allclose(got, want, atol=1e-12)


def test_exp_quat_small_angle_branch():
    # below the series cutoff the first-order expansion must stay unit-norm
    # and encode half the rotation vector
    v = np.array([1e-13, -2e-13, 5e-14])
    q = exp_quat(v)
    assert abs(np.linalg.norm(q) - 1.0) < 1e-15
    assert np.allclose(q[1:], 0.5 * v, atol=1e-26)
    assert np.allclose(exp_quat(np.zeros(3)), [1.0, 0.0, 0.0, 0.0])


def test_quat_angle_basics():
    qz = exp_quat(np.array([0.0, 0.0, np.pi]))
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    assert quat_angle(ident, ident) == 0.0
    assert abs(quat_angle(qz, ident) - np.pi) < 1e-12
    # double cover: q and -q are the same orientation
    rng = np.random.default_rng(5)
    for q in _random_quats(rng, 50):
        assert quat_angle(q, -q) < 1e-6


def test_quat_angle_matches_scipy_magnitude():
    rng = np.random.default_rng(6)
    for a, b in zip(_random_quats(rng, 100), _random_quats(rng, 100)):
        want = (_to_scipy(a).inv() * _to_scipy(b)).magnitude()
        assert abs(quat_angle(a, b) - want) < 1e-7


def test_rotate_points_matches_matrix_form():
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((40, 3))
    for q in _random_quats(rng, 10):
        r = rng.standard_normal(3)
        want = pts @ quat_to_matrix(q).T + r
        assert np.allclose(rotate_points(q, r, pts), want, atol=1e-12)

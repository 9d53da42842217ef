"""Shared fixtures: random-matrix helpers and small synthetic datasets."""

import numpy as np
import pytest

from rgftrack.dataio import write_dataset
from rgftrack.depthmodel import CameraModel
from rgftrack.rotations import exp_quat
from rgftrack.simulate import NoiseSpec, Scene, make_box, render_depth, simulate_frames
from rgftrack.state import DefaultPose


def rand_spd(rng, n, scale=1.0):
    """Random symmetric positive-definite matrix with a bounded condition number."""
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def tiny_camera():
    """Quarter-scale pinhole camera; cheap to render, same geometry family."""
    return CameraModel(160, 120, 131.25, 131.25, 79.5, 59.5, 0.5, 7.0)


def tilted_pose(distance=0.95):
    return DefaultPose(np.array([0.0, 0.0, float(distance)]),
                       exp_quat(np.array([0.4, 0.5, 0.175])))


def static_scene(frames, noise):
    """Static tilted box in front of the tiny camera."""
    pose = tilted_pose()
    return Scene(tiny_camera(), make_box(0.24),
                 np.tile(pose.r, (frames, 1)), np.tile(pose.q, (frames, 1)),
                 (), noise)


@pytest.fixture(scope="session")
def static_clean_dataset(tmp_path_factory):
    """100 noise-free frames of a static box, written in the dataset format."""
    root = tmp_path_factory.mktemp("static_clean")
    scene = static_scene(100, NoiseSpec(0.0, 0.0, 0.5, 7.0))
    image = render_depth(scene, 0)  # static and noise-free: one render serves all
    write_dataset(str(root), scene.camera, scene.mesh, scene.poses_r, scene.poses_q,
                  (image for _ in range(100)))
    return str(root)


@pytest.fixture(scope="session")
def static_noisy_dataset(tmp_path_factory):
    """12 static frames with 1 mm Gaussian depth noise and no outliers."""
    root = tmp_path_factory.mktemp("static_noisy")
    scene = static_scene(12, NoiseSpec(0.001, 0.0, 0.5, 7.0))
    write_dataset(str(root), scene.camera, scene.mesh, scene.poses_r, scene.poses_q,
                  simulate_frames(scene, seed=5))
    return str(root)

"""Pinhole rays, mesh ray casting and the per-pixel mixture density.

Ray-cast results are checked against an independent oracle that intersects
every (ray, triangle) pair by solving the 3x3 linear system

    t * d - u * e1 - v * e2 = v0,   u, v >= 0, u + v <= 1, t > 0

with a batched np.linalg.solve, instead of the Moeller-Trumbore arithmetic
used by the backends.
"""

import numpy as np
import pytest
import scipy.stats

from rgftrack import backend
from rgftrack.depthmodel import (CameraModel, ObservationParams, body_density,
                                 default_camera, gate_range, load_obj,
                                 make_mesh, mesh_in_camera, mixture_density,
                                 pixel_ray, ray_grid, raycast_depth,
                                 raycast_t, save_obj, tail_density)
from rgftrack.rotations import exp_quat, rotate_points
from rgftrack.simulate import make_box, make_icosphere
from rgftrack.state import DefaultPose

from conftest import tiny_camera, tilted_pose


def _raycast_oracle(mesh, pose, dirs):
    """Nearest positive intersection parameter per ray via linear solves."""
    verts = mesh_in_camera(mesh, pose)
    v0 = verts[mesh.triangles[:, 0]]
    e1 = verts[mesh.triangles[:, 1]] - v0
    e2 = verts[mesh.triangles[:, 2]] - v0
    ntri, nray = len(v0), len(dirs)
    a = np.empty((ntri, nray, 3, 3))
    a[..., 0] = dirs[None, :, :]
    a[..., 1] = -e1[:, None, :]
    a[..., 2] = -e2[:, None, :]
    det = np.linalg.det(a)
    ok = np.abs(det) > 1e-14
    a[~ok] = np.eye(3)
    x = np.linalg.solve(a, np.broadcast_to(v0[:, None, :], (ntri, nray, 3)))
    t, u, v = x[..., 0], x[..., 1], x[..., 2]
    hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1.0 + 1e-12) & (t > 1e-9)
    t = np.where(hit, t, np.inf).min(axis=0)
    return np.where(np.isfinite(t), t, np.nan)


def _frontal_quad(half=1.5, z=1.0):
    verts = [[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]]
    return make_mesh(verts, [[0, 1, 2], [0, 2, 3]])


def test_pixel_ray_unit_and_through_pixel():
    cam = tiny_camera()
    d = pixel_ray(cam, 10.0, 100.0)
    assert abs(np.linalg.norm(d) - 1.0) < 1e-15
    want = np.array([(10.0 - cam.cx) / cam.fx, (100.0 - cam.cy) / cam.fy, 1.0])
    assert np.allclose(d, want / np.linalg.norm(want), atol=1e-15)


def test_ray_grid_layout_and_caching():
    cam = tiny_camera()
    dirs = ray_grid(cam)
    assert dirs.shape == (cam.height * cam.width, 3)
    assert np.array_equal(dirs[:, 2], np.ones(len(dirs)))
    u, v = 7, 11
    row = dirs[v * cam.width + u]
    assert np.allclose(row, [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    assert ray_grid(cam) is dirs  # cached per camera
    assert not dirs.flags.writeable
    with pytest.raises(ValueError):
        dirs[0, 0] = 1.0


def test_mesh_in_camera_matches_rigid_transform():
    mesh = make_icosphere(0.3)
    pose = tilted_pose()
    want = rotate_points(pose.q, pose.r, mesh.vertices)
    assert np.allclose(mesh_in_camera(mesh, pose), want, atol=1e-15)


def test_raycast_matches_linear_system_oracle():
    rng = np.random.default_rng(40)
    mesh = make_icosphere(0.3)
    pose = tilted_pose()
    # grid rays around the object plus randomly jittered ones
    dirs = np.array(ray_grid(tiny_camera())[::97])
    dirs[1::2, :2] += rng.normal(scale=0.05, size=(len(dirs[1::2]), 2))
    got = raycast_t(mesh, pose, dirs)
    want = _raycast_oracle(mesh, pose, dirs)
    assert np.array_equal(np.isnan(got), np.isnan(want))
    assert np.isnan(got).any() and np.isfinite(got).any()
    ok = np.isfinite(want)
    assert np.abs(got[ok] - want[ok]).max() < 1e-9


def test_prune_does_not_change_results():
    rng = np.random.default_rng(41)
    mesh = make_icosphere(0.25, subdivisions=2)
    verts = mesh_in_camera(mesh, tilted_pose())
    dirs = np.array(ray_grid(tiny_camera())[::53])
    dirs[:, :2] += rng.normal(scale=0.03, size=(len(dirs), 2))
    impl = backend.impl_for(None)
    pruned = impl.raycast_z(verts, mesh.triangles, dirs, True)
    full = impl.raycast_z(verts, mesh.triangles, dirs, False)
    assert np.array_equal(pruned, full, equal_nan=True)


def test_frontal_quad_depth_is_exact():
    cam = tiny_camera()
    pose = DefaultPose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))
    t = raycast_t(_frontal_quad(), pose, ray_grid(cam))
    # unit-z rays: the parameter is z-depth, exactly 1.0 on the whole plane
    assert np.isfinite(t).all()
    assert np.abs(t - 1.0).max() < 1e-12
    assert raycast_depth(_frontal_quad(), pose, cam, cam.cx, cam.cy) == pytest.approx(1.0, abs=1e-12)


def test_box_front_face_depth():
    pose = DefaultPose(np.array([0.0, 0.0, 0.95]), np.array([1.0, 0.0, 0.0, 0.0]))
    d = raycast_depth(make_box(0.24), pose, tiny_camera(), 79.5, 59.5)
    assert d == pytest.approx(0.95 - 0.12, abs=1e-12)


def test_raycast_depth_miss_and_range_gate():
    cam = tiny_camera()
    pose = DefaultPose(np.array([0.0, 0.0, 0.95]), np.array([1.0, 0.0, 0.0, 0.0]))
    assert np.isnan(raycast_depth(make_box(0.24), pose, cam, 0.0, 0.0))
    # front face at 0.18 m sits inside the dead zone below range_min
    near = DefaultPose(np.array([0.0, 0.0, 0.3]), np.array([1.0, 0.0, 0.0, 0.0]))
    assert np.isnan(raycast_depth(make_box(0.24), near, cam, 79.5, 59.5))


def test_gate_range_copies_and_masks():
    cam = tiny_camera()
    t = np.array([0.4, 0.5, 3.0, 7.0, 7.5, np.nan])
    out = gate_range(t, cam)
    assert np.array_equal(out, [np.nan, 0.5, 3.0, 7.0, np.nan, np.nan], equal_nan=True)
    assert t[0] == 0.4  # input untouched


def test_body_density_matches_scipy():
    params = ObservationParams(noise_std=0.003)
    y = np.linspace(0.9, 1.1, 21)
    want = scipy.stats.norm.pdf(y, loc=1.0, scale=0.003)
    assert np.allclose(body_density(y, 1.0, params), want, rtol=1e-12)


def test_tail_density_support():
    params = ObservationParams()
    assert params.tail_value() == pytest.approx(1.0 / 6.5)
    y = np.array([0.4, 0.5, 3.0, 7.0, 7.1])
    want = np.array([0.0, 1.0, 1.0, 1.0, 0.0]) / 6.5
    assert np.allclose(tail_density(y, params), want)


def test_mixture_density_combination():
    params = ObservationParams(noise_std=0.002, tail_weight=0.1)
    y = np.linspace(0.6, 6.9, 50)
    want = 0.9 * body_density(y, 1.3, params) + 0.1 * tail_density(y, params)
    assert np.allclose(mixture_density(y, 1.3, params), want, rtol=1e-14)
    pure = ObservationParams(noise_std=0.002, tail_weight=0.0)
    assert np.array_equal(mixture_density(y, 1.3, pure), body_density(y, 1.3, pure))


def test_make_mesh_drops_degenerate_triangles():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]]
    mesh = make_mesh(verts, [[0, 1, 2], [0, 1, 3], [1, 1, 2]])  # collinear + repeated
    assert np.array_equal(mesh.triangles, [[0, 1, 2]])
    assert mesh.triangles.dtype == np.int32


def test_make_mesh_rejects_bad_indices():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    with pytest.raises(ValueError, match="index out of range"):
        make_mesh(verts, [[0, 1, 3]])
    with pytest.raises(ValueError, match="index out of range"):
        make_mesh(verts, [[0, 1, -1]])


def test_obj_round_trip_is_exact(tmp_path):
    mesh = make_icosphere(0.173)
    path = tmp_path / "shape.obj"
    save_obj(mesh, path)
    back = load_obj(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_load_obj_subset_and_errors(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("# comment\nvn 0 0 1\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3\n")
    mesh = load_obj(path)
    assert len(mesh.vertices) == 4 and len(mesh.triangles) == 1
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(ValueError, match="non-triangular"):
        load_obj(path)
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 0 1 2\n")
    with pytest.raises(ValueError, match="1-based"):
        load_obj(path)


def test_default_camera_specs():
    cam = default_camera()
    assert (cam.width, cam.height) == (640, 480)
    assert (cam.fx, cam.fy, cam.cx, cam.cy) == (525.0, 525.0, 319.5, 239.5)
    assert (cam.range_min, cam.range_max) == (0.5, 7.0)
    assert isinstance(cam, CameraModel)

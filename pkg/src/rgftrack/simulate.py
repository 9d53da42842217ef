"""Synthetic depth scenes: smooth trajectories, rendering, sensor corruption.

Rendering goes through the same ray-cast code path as the filter's
observation model, so simulated data and filter predictions agree exactly in
the noise-free case.
"""

import math
from typing import NamedTuple

import numpy as np

from .depthmodel import CameraModel, DepthImage, gate_range, make_mesh, ray_grid, raycast_t
from .rotations import exp_quat, quat_multiply
from .state import DefaultPose

# category -> (translational speed [m/s], rotational speed [deg/s])
TRAJECTORY_CATEGORIES = {
    0: (0.0, 0.0),
    1: (0.05, 10.0),
    2: (0.11, 25.0),
    3: (0.21, 50.0),
}

# soft containment box for trajectories (camera frame, meters)
_BOUNDS_LO = np.array([-0.25, -0.18, 0.75])
_BOUNDS_HI = np.array([0.25, 0.18, 1.15])


class NoiseSpec(NamedTuple):
    depth_noise_std: float = 0.001
    outlier_rate: float = 0.02
    range_min: float = 0.5
    range_max: float = 7.0


class Occluder(NamedTuple):
    mesh: object          # TriangleMesh
    pose: DefaultPose
    start: int            # first active frame
    end: int              # one past the last active frame; -1 = until the end


class Scene(NamedTuple):
    camera: CameraModel
    mesh: object          # TriangleMesh, the tracked object
    poses_r: np.ndarray   # (F, 3)
    poses_q: np.ndarray   # (F, 4)
    occluders: tuple
    noise: NoiseSpec
    fps: float = 30.0


def make_box(size):
    """Axis-aligned box of the given edge length, centered at the origin."""
    h = 0.5 * float(size)
    verts = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    tris = np.array([
        [0, 1, 3], [0, 3, 2],   # x = -h
        [4, 6, 7], [4, 7, 5],   # x = +h
        [0, 4, 5], [0, 5, 1],   # y = -h
        [2, 3, 7], [2, 7, 6],   # y = +h
        [0, 2, 6], [0, 6, 4],   # z = -h
        [1, 5, 7], [1, 7, 3],   # z = +h
    ], dtype=np.int32)
    return make_mesh(verts, tris)


def make_quad(width, height):
    """Two-triangle rectangle in the xy plane, centered at the origin."""
    w, h = 0.5 * float(width), 0.5 * float(height)
    verts = np.array([[-w, -h, 0.0], [w, -h, 0.0], [w, h, 0.0], [-w, h, 0.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return make_mesh(verts, tris)


def make_icosphere(radius, subdivisions=1):
    """Geodesic sphere from a subdivided icosahedron."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_tris = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = 0.5 * (np.array(verts[i]) + np.array(verts[j]))
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_tris += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new_tris
    return make_mesh(np.array(verts) * float(radius), np.array(tris, dtype=np.int32))


def _smooth_unit_walk(rng, initial, eta, pull=None):
    """One step of a low-pass random walk on the unit sphere."""
    step = initial + eta * rng.standard_normal(3)
    if pull is not None:
        step = step + pull
    return step / np.linalg.norm(step)


def make_trajectory(category, frames, seed, fps=30.0, start=(0.0, 0.0, 0.95),
                    start_rotvec=(0.0, 0.0, 0.0)):
    """Smooth random trajectory at one of the velocity categories.

    The translational and angular speeds are held at the category values
    exactly; only the directions perform a low-pass-filtered random walk,
    with a soft steer back toward the containment box.  Category 0 is
    static.  Returns (positions (F, 3), quaternions (F, 4)).
    """
    speed_mps, rate_dps = TRAJECTORY_CATEGORIES[category]
    step_t = speed_mps / fps
    step_r = math.radians(rate_dps) / fps
    rng = np.random.default_rng(seed)

    r = np.empty((frames, 3))
    q = np.empty((frames, 4))
    r[0] = np.asarray(start, dtype=float)
    q[0] = exp_quat(np.asarray(start_rotvec, dtype=float))
    if frames == 1 or (step_t == 0.0 and step_r == 0.0):
        r[1:] = r[0]
        q[1:] = q[0]
        return r, q

    direction = _smooth_unit_walk(rng, rng.standard_normal(3), 0.0)
    axis = _smooth_unit_walk(rng, rng.standard_normal(3), 0.0)
    center = 0.5 * (_BOUNDS_LO + _BOUNDS_HI)
    for t in range(1, frames):
        excess = np.maximum(_BOUNDS_LO - r[t - 1], 0.0) + np.minimum(_BOUNDS_HI - r[t - 1], 0.0)
        pull = None
        if np.any(excess != 0.0):
            back = center - r[t - 1]
            pull = 4.0 * np.linalg.norm(excess) / max(np.linalg.norm(back), 1e-9) * back
        direction = _smooth_unit_walk(rng, direction, 0.25, pull)
        axis = _smooth_unit_walk(rng, axis, 0.25)
        r[t] = r[t - 1] + step_t * direction
        q[t] = quat_multiply(exp_quat(step_r * axis), q[t - 1])
    return r, q


def render_depth(scene, frame):
    """Noise-free depth image of the scene at one frame.

    Meshes are combined by the nearest surface along each ray; range gating
    happens after that, exactly as in the filter's observation model.
    """
    cam = scene.camera
    dirs = ray_grid(cam)
    pose = DefaultPose(scene.poses_r[frame], scene.poses_q[frame])
    t = raycast_t(scene.mesh, pose, dirs)
    for occ in scene.occluders:
        end = occ.end if occ.end >= 0 else len(scene.poses_r)
        if occ.start <= frame < end:
            t = np.fmin(t, raycast_t(occ.mesh, occ.pose, dirs))
    depth = gate_range(t, cam).reshape(cam.height, cam.width)
    return DepthImage(cam.width, cam.height, depth)


def corrupt(image, noise, rng):
    """Sensor corruption: additive Gaussian depth noise on inliers, uniform
    replacement outliers at the given rate, everything clamped to range."""
    depth = np.array(image.depth, dtype=float)
    flat = depth.reshape(-1)
    valid = np.isfinite(flat)
    n = int(valid.sum())
    if n == 0:
        return DepthImage(image.width, image.height, depth)
    vals = flat[valid]
    if noise.depth_noise_std > 0.0:
        vals = vals + rng.normal(0.0, noise.depth_noise_std, n)
    if noise.outlier_rate > 0.0:
        outlier = rng.random(n) < noise.outlier_rate
        vals[outlier] = rng.uniform(noise.range_min, noise.range_max, int(outlier.sum()))
    flat[valid] = np.clip(vals, noise.range_min, noise.range_max)
    return DepthImage(image.width, image.height, depth)


# ---------------------------------------------------------------------------
# scene construction from a flat key=value config

SCENE_DEFAULTS = {
    "width": 640,
    "height": 480,
    "fx": 525.0,
    "fy": 525.0,
    "cx": 319.5,
    "cy": 239.5,
    "range_min": 0.5,
    "range_max": 7.0,
    "fps": 30.0,
    "frames": 300,
    "category": 1,
    "object": "box",
    "object_size": 0.24,
    "distance": 0.95,
    "tilt": 0.5,
    "depth_noise_std": 0.001,
    "outlier_rate": 0.02,
    "occluder_frac": 0.0,
    "occluder_z": 0.6,
    "occluder_start": 60,
    "occluder_end": -1,
    "occluder_anchor": "left",
}


def _build_object(kind, size):
    if kind == "box":
        return make_box(size)
    if kind == "sphere":
        return make_icosphere(0.5 * size, 2)
    from .depthmodel import load_obj
    return load_obj(kind)


def _project_bbox(mesh, pose, camera):
    """Pixel-space bounding box of the posed mesh."""
    from .depthmodel import mesh_in_camera
    pts = mesh_in_camera(mesh, pose)
    u = camera.fx * pts[:, 0] / pts[:, 2] + camera.cx
    v = camera.fy * pts[:, 1] / pts[:, 2] + camera.cy
    return u.min(), u.max(), v.min(), v.max()


def _make_occluder(cfg, camera, mesh, pose):
    """Camera-facing quad at occluder_z covering occluder_frac of the
    object's projected footprint.

    anchor "left" grows the patch from the left edge (a passer-by shape,
    sweeping silhouette and interior alike); anchor "center" scales a
    concentric patch that stays inside the silhouette until frac nears 1.
    """
    frac = float(cfg["occluder_frac"])
    z = float(cfg["occluder_z"])
    anchor = str(cfg["occluder_anchor"])
    u0, u1, v0, v1 = _project_bbox(mesh, pose, camera)
    pad_u = 0.15 * (u1 - u0)
    pad_v = 0.15 * (v1 - v0)
    if anchor == "center":
        # equal linear shrink in u and v: frac of the bbox area
        half_u = 0.5 * math.sqrt(frac) * (u1 - u0) + (pad_u if frac >= 1.0 else 0.0)
        half_v = 0.5 * math.sqrt(frac) * (v1 - v0) + (pad_v if frac >= 1.0 else 0.0)
        mid_u = 0.5 * (u0 + u1)
        mid_v = 0.5 * (v0 + v1)
        left, right = mid_u - half_u, mid_u + half_u
        top, bottom = mid_v - half_v, mid_v + half_v
    else:
        left = u0 - pad_u
        right = u0 + frac * (u1 - u0) + (pad_u if frac >= 1.0 else 0.0)
        top = v0 - pad_v
        bottom = v1 + pad_v
    # back-project the pixel rectangle to the occluder plane
    x0 = (left - camera.cx) / camera.fx * z
    x1 = (right - camera.cx) / camera.fx * z
    y0 = (top - camera.cy) / camera.fy * z
    y1 = (bottom - camera.cy) / camera.fy * z
    quad = make_quad(x1 - x0, y1 - y0)
    center = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1), z])
    start = int(cfg["occluder_start"])
    end = int(cfg["occluder_end"])
    return Occluder(quad, DefaultPose(center, np.array([1.0, 0.0, 0.0, 0.0])), start, end)


def scene_from_config(cfg, seed):
    """Build a Scene from a flat config mapping (unknown keys rejected)."""
    merged = dict(SCENE_DEFAULTS)
    for key, value in cfg.items():
        if key not in SCENE_DEFAULTS:
            raise ValueError(f"unknown scene config key {key!r}")
        merged[key] = type(SCENE_DEFAULTS[key])(value) if key != "object" else str(value)
    camera = CameraModel(int(merged["width"]), int(merged["height"]),
                         float(merged["fx"]), float(merged["fy"]),
                         float(merged["cx"]), float(merged["cy"]),
                         float(merged["range_min"]), float(merged["range_max"]))
    mesh = _build_object(merged["object"], float(merged["object_size"]))
    tilt = float(merged["tilt"])
    poses_r, poses_q = make_trajectory(
        int(merged["category"]), int(merged["frames"]), np.random.default_rng([seed, 0]),
        fps=float(merged["fps"]), start=(0.0, 0.0, float(merged["distance"])),
        start_rotvec=(0.8 * tilt, 1.0 * tilt, 0.35 * tilt))
    occluders = ()
    if float(merged["occluder_frac"]) > 0.0:
        frame = min(int(merged["occluder_start"]), int(merged["frames"]) - 1)
        pose = DefaultPose(poses_r[frame], poses_q[frame])
        occluders = (_make_occluder(merged, camera, mesh, pose),)
    noise = NoiseSpec(float(merged["depth_noise_std"]), float(merged["outlier_rate"]),
                      camera.range_min, camera.range_max)
    return Scene(camera, mesh, poses_r, poses_q, occluders, noise, float(merged["fps"]))


def simulate_frames(scene, seed):
    """Yield corrupted depth images for every frame of the scene."""
    rng = np.random.default_rng([seed, 1])
    for frame in range(len(scene.poses_r)):
        yield corrupt(render_depth(scene, frame), scene.noise, rng)

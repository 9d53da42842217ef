"""Depth-camera observation model.

Pinhole geometry, triangle-mesh ray casting and the per-pixel measurement
densities.  Depth is the z coordinate of the surface point in the camera
frame (not the distance along the ray); missing measurements are NaN.

The measurement density per pixel is a two-component mixture: a Gaussian
"body" around the predicted depth and a uniform "tail" over the sensor range
that absorbs occlusions and other outliers.
"""

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import backend
from .rotations import quat_to_matrix


class CameraModel(NamedTuple):
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    range_min: float = 0.5
    range_max: float = 7.0


class DepthImage(NamedTuple):
    width: int
    height: int
    depth: np.ndarray  # (height, width) float64 z-depth [m]; NaN = missing


class TriangleMesh(NamedTuple):
    vertices: np.ndarray   # (V, 3) float64, object frame
    triangles: np.ndarray  # (T, 3) int32 vertex indices


class ObservationParams(NamedTuple):
    noise_std: float = 0.001    # body (inlier) depth noise [m]
    tail_weight: float = 0.1    # outlier mixture weight w
    range_min: float = 0.5
    range_max: float = 7.0

    def tail_value(self):
        """Uniform tail density over the sensor range."""
        return 1.0 / (self.range_max - self.range_min)


def default_camera():
    """VGA pinhole camera with Kinect-like intrinsics."""
    return CameraModel(640, 480, 525.0, 525.0, 319.5, 239.5)


def pixel_ray(camera, u, v):
    """Unit ray direction through pixel (u, v)."""
    d = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
    return d / np.linalg.norm(d)


@lru_cache(maxsize=8)
def ray_grid(camera):
    """(H*W, 3) per-pixel ray directions with unit z, row-major pixel order."""
    du = (np.arange(camera.width, dtype=float) - camera.cx) / camera.fx
    dv = (np.arange(camera.height, dtype=float) - camera.cy) / camera.fy
    dirs = np.empty((camera.height, camera.width, 3))
    dirs[..., 0] = du[None, :]
    dirs[..., 1] = dv[:, None]
    dirs[..., 2] = 1.0
    dirs = dirs.reshape(-1, 3)
    dirs.flags.writeable = False
    return dirs


def mesh_in_camera(mesh, pose):
    """Mesh vertices transformed to the camera frame."""
    return mesh.vertices @ quat_to_matrix(pose.q).T + np.asarray(pose.r, dtype=float)


def raycast_t(mesh, pose, dirs, impl=None):
    """Nearest positive intersection parameter per ray; NaN when none.

    `dirs` rows have unit z component, so the parameter is z-depth.  Range
    gating is left to the caller (a too-near surface must shadow what is
    behind it before gating is applied).
    """
    verts = mesh_in_camera(mesh, pose)
    return backend.impl_for(impl).raycast_z(verts, mesh.triangles, dirs, True)


def gate_range(t, camera):
    """NaN out depths outside the sensor range."""
    t = np.array(t, dtype=float)
    bad = np.isfinite(t) & ((t < camera.range_min) | (t > camera.range_max))
    t[bad] = np.nan
    return t


def raycast_depth(mesh, pose, camera, u, v):
    """Predicted z-depth at pixel (u, v); NaN if the ray misses the mesh or
    the hit lies outside the sensor range."""
    d = np.array([[(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0]])
    return float(gate_range(raycast_t(mesh, pose, d), camera)[0])


def body_density(y, predicted_depth, params):
    """Gaussian inlier density N(y | predicted_depth, noise_std^2)."""
    var = params.noise_std ** 2
    z = np.asarray(y, dtype=float) - predicted_depth
    return np.exp(-0.5 * z * z / var) / np.sqrt(2.0 * np.pi * var)


def tail_density(y, params):
    """Uniform outlier density over the sensor range (0 outside)."""
    y = np.asarray(y, dtype=float)
    inside = (y >= params.range_min) & (y <= params.range_max)
    return np.where(inside, params.tail_value(), 0.0)


def mixture_density(y, predicted_depth, params):
    """(1-w) body + w tail; with w = 0 this is exactly the body density."""
    w = params.tail_weight
    if w == 0.0:
        return body_density(y, predicted_depth, params)
    return (1.0 - w) * body_density(y, predicted_depth, params) + w * tail_density(y, params)


def _triangle_areas(vertices, triangles):
    v0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - v0
    e2 = vertices[triangles[:, 2]] - v0
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def make_mesh(vertices, triangles):
    """Build a TriangleMesh, dropping degenerate (zero-area) triangles."""
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
    if triangles.size:
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise ValueError("triangle index out of range")
        scale = float(np.abs(vertices).max()) if vertices.size else 1.0
        keep = _triangle_areas(vertices, triangles) > 1e-14 * max(scale * scale, 1e-30)
        triangles = triangles[keep]
    return TriangleMesh(vertices, triangles)


def load_obj(path):
    """Load a Wavefront OBJ subset: `v x y z` and triangular `f i j k` lines
    (1-based indices); every other line is ignored."""
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(f"non-triangular face in {path}: {line.strip()!r}")
                if min(idx) < 1:
                    raise ValueError(f"OBJ indices must be positive 1-based: {line.strip()!r}")
                faces.append([i - 1 for i in idx])
    return make_mesh(np.array(vertices, dtype=float).reshape(-1, 3),
                     np.array(faces, dtype=np.int32).reshape(-1, 3))


def save_obj(mesh, path):
    """Write the `v`/`f` OBJ subset understood by load_obj."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")

"""Wall-clock scaling of the depth update across pixel counts.

Times the factorized update (per backend), the sequential per-pixel baseline,
and — at small M riding along as a correctness check — the dense joint
update against an affine surrogate observation model.
"""

import math
import time

import numpy as np

from . import gaussians
from .backend import available_backends
from .baselines import dense_gf_update, sequential_gf_update
from .depthmodel import (CameraModel, DepthImage, ObservationParams, gate_range,
                         ray_grid, raycast_t)
from .robust import update, update_from_depths
from .simulate import make_quad
from .state import DefaultPose, ProcessNoiseParams, apply_state_to_pose, initial_belief, predict
from .unscented import UTParams, generate_sigma_points


def grid_shape(m):
    """(width, height) with width*height == m, as close to 4:3 as m allows."""
    h = max(1, round(math.sqrt(0.75 * m)))
    while m % h:
        h -= 1
    return m // h, h


def wall_setup(m, seed=12345):
    """Camera, wall mesh, pose and noisy depth image with all m pixels on
    the wall (the heaviest footprint the update can see)."""
    w, h = grid_shape(m)
    camera = CameraModel(w, h, float(w), float(w), (w - 1) / 2.0, (h - 1) / 2.0, 0.5, 7.0)
    distance = 1.0
    mesh = make_quad(1.3 * distance * w / camera.fx, 1.3 * distance * h / camera.fy)
    pose = DefaultPose(np.array([0.0, 0.0, distance]), np.array([1.0, 0.0, 0.0, 0.0]))
    depth = gate_range(raycast_t(mesh, pose, ray_grid(camera)), camera).reshape(h, w)
    rng = np.random.default_rng(seed)
    depth = depth + 0.001 * rng.standard_normal(depth.shape)
    return camera, mesh, pose, DepthImage(w, h, depth)


def _bench_prior():
    return initial_belief(0.01, 0.03, 0.003, 0.01)


def time_factorized(m, reps, impl=None):
    """Per-repetition predict+update wall times [ms] and the square-root
    count of one update."""
    camera, mesh, pose, image = wall_setup(m)
    prior = _bench_prior()
    params = ObservationParams()
    ut = UTParams()
    noise = ProcessNoiseParams()
    update(predict(prior, noise), pose, image, mesh, camera, params, ut, impl)  # warm-up
    before = gaussians.CHOLESKY_CALLS
    update(predict(prior, noise), pose, image, mesh, camera, params, ut, impl)
    chol_calls = gaussians.CHOLESKY_CALLS - before
    times = np.empty(reps)
    for i in range(reps):
        start = time.perf_counter()
        belief = predict(prior, noise)
        update(belief, pose, image, mesh, camera, params, ut, impl)
        times[i] = 1000.0 * (time.perf_counter() - start)
    return times, chol_calls


def time_sequential(m, reps):
    """Per-repetition wall times [ms] of the per-pixel sequential baseline.

    Every pixel re-derives sigma points and casts one ray per sigma state;
    there is nothing to batch, which is exactly the cost being measured.
    """
    camera, mesh, pose, image = wall_setup(m)
    dirs = ray_grid(camera)
    y = np.asarray(image.depth, dtype=float).reshape(-1)
    hit = np.isfinite(y)
    dirs, y = dirs[hit], y[hit]
    prior = _bench_prior()
    params = ObservationParams()
    ut = UTParams()
    noise = ProcessNoiseParams()

    def pixel_fn(i, states):
        out = np.empty(states.shape[0])
        d = dirs[i:i + 1]
        for k in range(states.shape[0]):
            t = raycast_t(mesh, apply_state_to_pose(pose, states[k]), d)[0]
            out[k] = t if np.isfinite(t) and t <= camera.range_max else camera.range_max
        return out

    times = np.empty(reps)
    for i in range(reps):
        start = time.perf_counter()
        belief = predict(prior, noise)
        sequential_gf_update(belief, pixel_fn, y, params.noise_std ** 2, ut)
        times[i] = 1000.0 * (time.perf_counter() - start)
    return times


def _affine_surrogate(m, seed):
    rng = np.random.default_rng(seed)
    prior = _bench_prior()
    n = prior.mean.shape[0]
    h_mat = rng.standard_normal((m, n))
    c = rng.standard_normal(m)
    y_obs = h_mat @ (0.01 * rng.standard_normal(n)) + c + 0.001 * rng.standard_normal(m)
    return prior, h_mat, c, y_obs


def dense_affine_check(m=100, seed=7, impl=None):
    """Relative disagreement between the dense joint update and the
    factorized information-form update on an affine observation model
    (exactly solvable, so both should land on the Kalman posterior)."""
    prior, h_mat, c, y_obs = _affine_surrogate(m, seed)
    params = ObservationParams(noise_std=0.001, tail_weight=0.0)
    ut = UTParams()
    dense = dense_gf_update(prior, lambda states: states @ h_mat.T + c, y_obs,
                            params.noise_std ** 2, ut)
    sigma = generate_sigma_points(prior, ut)
    depths = (sigma.points @ h_mat.T + c).T        # (M, K)
    fact, _, _ = update_from_depths(prior, sigma, depths, y_obs, params, impl)
    scale = math.sqrt(float(np.trace(prior.cov)) / prior.mean.shape[0])
    mean_err = float(np.max(np.abs(dense.mean - fact.mean))) / scale
    cov_err = float(np.max(np.abs(dense.cov - fact.cov))) / scale ** 2
    return max(mean_err, cov_err)


def time_dense(m, reps, seed=7):
    """Dense-update wall times [ms] on the affine surrogate (small M only)."""
    prior, h_mat, c, y_obs = _affine_surrogate(m, seed)
    noise_var = 1e-6
    times = np.empty(reps)
    for i in range(reps):
        start = time.perf_counter()
        dense_gf_update(prior, lambda states: states @ h_mat.T + c, y_obs, noise_var)
        times[i] = 1000.0 * (time.perf_counter() - start)
    return times


DENSE_MAX_PIXELS = 200


def run_bench(pixels, reps, seq_reps=None, dense_m=100):
    """Timing table rows plus fit/check summary.

    Sequential repetitions default to a small cap; the baseline is orders of
    magnitude slower and its median stabilizes quickly.
    """
    if seq_reps is None:
        seq_reps = max(1, min(3, reps // 10))
    rows = []
    for m in pixels:
        sreps = seq_reps if m <= 3072 else max(1, seq_reps // 3)
        seq = time_sequential(m, sreps)
        for backend in available_backends():
            times, chol = time_factorized(m, reps, backend)
            rows.append({
                "m": m,
                "backend": backend,
                "update_ms": float(np.median(times)),
                "sequential_ms": float(np.median(seq)),
                "dense_ms": float(np.median(time_dense(m, reps))) if m <= DENSE_MAX_PIXELS
                            else float("nan"),
                "chol_calls": int(chol),
            })
    fits = {}
    for backend in available_backends():
        ms = [row["m"] for row in rows if row["backend"] == backend]
        ts = [row["update_ms"] for row in rows if row["backend"] == backend]
        if len(ms) >= 2:
            slope, intercept = np.polyfit(ms, ts, 1)
            fits[backend] = (1000.0 * float(slope), float(intercept))
    check = dense_affine_check(dense_m)
    return rows, fits, check


def write_bench_csv(path, rows, fits, check, pixels, reps):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# pixels={','.join(str(m) for m in pixels)} reps={reps} seed=0 "
                 f"dense_check_rel_err={check!r}\n")
        fh.write("m,backend,update_ms,sequential_ms,dense_ms,chol_calls\n")
        for row in rows:
            fh.write(f"{row['m']},{row['backend']},{row['update_ms']!r},"
                     f"{row['sequential_ms']!r},{row['dense_ms']!r},{row['chol_calls']}\n")
        for backend, (slope_us, intercept) in fits.items():
            fh.write(f"# fit backend={backend} slope_us_per_pixel={slope_us!r} "
                     f"intercept_ms={intercept!r}\n")

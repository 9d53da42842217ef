"""Frame-by-frame tracking loops over recorded datasets.

Ties together the dataset reader, the pixel down-sampling used for real-time
rates, the filters, and the record CSV writer.
"""

import dataclasses
import time

import numpy as np

from .baselines import init_particles, particle_estimate, pf_step
from .dataio import Dataset, write_records
from .depthmodel import CameraModel, DepthImage, ObservationParams
from .gaussians import GaussianBelief
from .robust import update
from .state import V, W, DefaultPose, ProcessNoiseParams, initial_belief, predict, re_zero
from .unscented import UTParams

FILTER_NAMES = ("rgf", "gf0", "pf")


@dataclasses.dataclass
class FilterConfig:
    pixel_noise_std: float = 0.001
    tail_weight: float = 0.1
    process_sigma_v: float = 0.001
    process_sigma_omega: float = 0.01
    ut_alpha: float = 1.0
    ut_beta: float = 2.0
    ut_kappa: float = 0.0
    range_min: float = 0.5
    range_max: float = 7.0
    downsample: int = 10
    pf_particles: int = 200
    init_sigma_r: float = 0.01
    init_sigma_o: float = 0.03
    init_sigma_v: float = 0.003
    init_sigma_omega: float = 0.01

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ValueError(f"unknown filter config key {key!r}")
            kwargs[key] = int(value) if known[key] is int else float(value)
        return cls(**kwargs)

    def observation_params(self, tail_weight=None):
        w = self.tail_weight if tail_weight is None else tail_weight
        return ObservationParams(self.pixel_noise_std, w, self.range_min, self.range_max)


def downsample_camera(camera, stride):
    """Camera for the image grid thinned by `stride` (centered phase)."""
    stride = int(stride)
    if stride <= 1:
        return camera
    phase = stride // 2
    width = (camera.width - phase + stride - 1) // stride
    height = (camera.height - phase + stride - 1) // stride
    return CameraModel(width, height,
                       camera.fx / stride, camera.fy / stride,
                       (camera.cx - phase) / stride, (camera.cy - phase) / stride,
                       camera.range_min, camera.range_max)


def downsample_image(image, stride):
    stride = int(stride)
    if stride <= 1:
        return image
    phase = stride // 2
    depth = np.ascontiguousarray(image.depth[phase::stride, phase::stride])
    return DepthImage(depth.shape[1], depth.shape[0], depth)


class RgfTracker:
    """Predict / robust-update / re-anchor loop around one object mesh.

    tail_weight=0 degrades the update to the plain (non-robust) Gaussian
    filter, which is the gf0 baseline.
    """

    def __init__(self, camera, mesh, config, pose, tail_weight=None, impl=None):
        self.camera = camera
        self.mesh = mesh
        self.config = config
        self.impl = impl
        self.noise = ProcessNoiseParams(config.process_sigma_v, config.process_sigma_omega)
        self.params = config.observation_params(tail_weight)
        self.ut = UTParams(config.ut_alpha, config.ut_beta, config.ut_kappa)
        self.belief = None
        self.anchor = None
        self.last = None
        self.reset(pose)

    def reset(self, pose):
        """Re-initialize at a known pose; velocity estimates survive."""
        fresh = initial_belief(self.config.init_sigma_r, self.config.init_sigma_o,
                               self.config.init_sigma_v, self.config.init_sigma_omega)
        mean = fresh.mean.copy()
        if self.belief is not None:
            mean[V] = self.belief.mean[V]
            mean[W] = self.belief.mean[W]
        self.belief = GaussianBelief(mean, fresh.cov)
        self.anchor = DefaultPose(np.array(pose.r, dtype=float), np.array(pose.q, dtype=float))

    def step(self, image, predict_first=True):
        """Process one frame; returns the posterior pose estimate."""
        belief = predict(self.belief, self.noise) if predict_first else self.belief
        result = update(belief, self.anchor, image, self.mesh, self.camera,
                        self.params, self.ut, self.impl)
        self.belief, self.anchor = re_zero(result.belief, self.anchor)
        self.last = result
        return self.pose()

    def pose(self):
        return self.anchor


class PfTracker:
    """Bootstrap particle filter with the same stepping interface."""

    def __init__(self, camera, mesh, config, pose, seed=0):
        self.camera = camera
        self.mesh = mesh
        self.config = config
        self.noise = ProcessNoiseParams(config.process_sigma_v, config.process_sigma_omega)
        self.params = config.observation_params()
        self._seed = seed
        self.particles = None
        self.reset(pose)

    def reset(self, pose):
        rng = self.particles.rng if self.particles is not None else self._seed
        sigmas = (self.config.init_sigma_r, self.config.init_sigma_o,
                  self.config.init_sigma_v, self.config.init_sigma_omega)
        self.particles = init_particles(pose, sigmas, self.config.pf_particles, rng)

    def step(self, image, predict_first=True):
        self.particles = pf_step(self.particles, image, self.mesh, self.camera,
                                 self.params, self.noise)
        return self.pose()

    def pose(self):
        return particle_estimate(self.particles)


def make_tracker(name, camera, mesh, config, pose, seed=0, impl=None):
    if name == "rgf":
        return RgfTracker(camera, mesh, config, pose, impl=impl)
    if name == "gf0":
        return RgfTracker(camera, mesh, config, pose, tail_weight=0.0, impl=impl)
    if name == "pf":
        return PfTracker(camera, mesh, config, pose, seed=seed)
    raise ValueError(f"unknown filter {name!r}; expected one of {FILTER_NAMES}")


def run_tracking(data_dir, filter_name, config, reset_every=0, seed=0, impl=None,
                 max_frames=None):
    """Track through a dataset; returns a list of per-frame record dicts.

    Frame 0 initializes the filter at the ground-truth pose and runs an
    update only.  With reset_every > 0, every reset_every-th frame repeats
    that re-initialization, so errors are measured over bounded segments.
    """
    data = Dataset(data_dir)
    camera = downsample_camera(
        CameraModel(data.camera.width, data.camera.height,
                    data.camera.fx, data.camera.fy, data.camera.cx, data.camera.cy,
                    config.range_min, config.range_max),
        config.downsample)
    frames = data.frames if max_frames is None else min(data.frames, int(max_frames))
    tracker = None
    rows = []
    for frame in range(frames):
        image = downsample_image(data.image(frame), config.downsample)
        gt = DefaultPose(data.poses_r[frame], data.poses_q[frame])
        fresh = frame == 0 or (reset_every > 0 and frame % reset_every == 0)
        start = time.perf_counter()
        if fresh:
            if tracker is None:
                tracker = make_tracker(filter_name, camera, data.mesh, config, gt,
                                       seed=seed, impl=impl)
            else:
                tracker.reset(gt)
            est = tracker.step(image, predict_first=False)
        else:
            est = tracker.step(image)
        elapsed_ms = 1000.0 * (time.perf_counter() - start)
        rows.append({
            "frame": frame,
            "tx": est.r[0], "ty": est.r[1], "tz": est.r[2],
            "qw": est.q[0], "qx": est.q[1], "qy": est.q[2], "qz": est.q[3],
            "gt_tx": gt.r[0], "gt_ty": gt.r[1], "gt_tz": gt.r[2],
            "gt_qw": gt.q[0], "gt_qx": gt.q[1], "gt_qy": gt.q[2], "gt_qz": gt.q[3],
            "update_ms": elapsed_ms,
        })
    return rows


def track_to_csv(data_dir, filter_name, config, out_path, reset_every=0, seed=0,
                 config_path="", impl=None, max_frames=None):
    rows = run_tracking(data_dir, filter_name, config, reset_every, seed, impl, max_frames)
    header = {"filter": filter_name, "data": data_dir, "config": config_path or "-",
              "reset_every": reset_every, "seed": seed}
    write_records(out_path, rows, header)
    return rows

"""Robust Gaussian filtering for 6-DoF rigid-object tracking from depth images."""

__version__ = "0.1.0"

from .gaussians import (
    GaussianBelief,
    JointGaussian,
    NotPositiveDefinite,
    SingularInnovationCovariance,
    cholesky_sqrt,
    condition,
    symmetrize_psd,
)
from .unscented import SigmaPointSet, UTParams, generate_sigma_points
from .state import DefaultPose, ProcessNoiseParams, apply_state_to_pose, predict, re_zero
from .depthmodel import (
    CameraModel,
    DepthImage,
    ObservationParams,
    TriangleMesh,
    body_density,
    load_obj,
    mixture_density,
    pixel_ray,
    raycast_depth,
)
from .robust import SingularPixelCovariance, UpdateResult, update, update_from_depths

__all__ = [
    "GaussianBelief",
    "JointGaussian",
    "NotPositiveDefinite",
    "SingularInnovationCovariance",
    "SingularPixelCovariance",
    "cholesky_sqrt",
    "condition",
    "symmetrize_psd",
    "SigmaPointSet",
    "UTParams",
    "generate_sigma_points",
    "DefaultPose",
    "ProcessNoiseParams",
    "apply_state_to_pose",
    "predict",
    "re_zero",
    "CameraModel",
    "DepthImage",
    "ObservationParams",
    "TriangleMesh",
    "body_density",
    "load_obj",
    "mixture_density",
    "pixel_ray",
    "raycast_depth",
    "UpdateResult",
    "update",
    "update_from_depths",
]

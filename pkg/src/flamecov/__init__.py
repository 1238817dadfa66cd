"""Flame surface estimation from two thermal silhouettes.

The center curve is a circular arc fixed by its midpoint; the cross-section
width along it is a Gaussian-process regression over arc length.
"""
from .errors import FlameError
from .estimate import EstimatorConfig, StereoObservation, fit_flame, joint_refine
from .evaluate import FrameScore, compare_models, dataset_map, frame_score
from .geom import CameraModel, Pose
from .model import ArcParams, FlameModel, arc_from_midpoint, midpoint_from_arc
from .silhouette import Silhouette, ThermalImage, threshold
from .width import WidthModel, width_fit, width_predict

__version__ = "0.1.0"

__all__ = [
    "ArcParams", "CameraModel", "EstimatorConfig", "FlameError", "FlameModel", "FrameScore",
    "Pose", "Silhouette", "StereoObservation", "ThermalImage", "WidthModel", "arc_from_midpoint",
    "compare_models", "dataset_map", "fit_flame", "frame_score", "joint_refine",
    "midpoint_from_arc", "threshold", "width_fit", "width_predict",
]

"""Keypoint detectors and descriptors."""

from .keypoint import Keypoint, keypoint_to_dict, wrap_angle
from .fast import detect_fast
from .orb import OrbConfig, compute_rbrief, detect_orb, orientation_intensity_centroid
from .sift import SiftConfig, detect_sift

__all__ = [
    "Keypoint",
    "keypoint_to_dict",
    "wrap_angle",
    "detect_fast",
    "OrbConfig",
    "compute_rbrief",
    "detect_orb",
    "orientation_intensity_centroid",
    "SiftConfig",
    "detect_sift",
]

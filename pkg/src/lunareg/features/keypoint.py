"""Keypoint record shared by both detectors, plus JSON helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Keypoint:
    """Detected feature in base-image pixel coordinates."""

    x: float
    y: float
    octave: int = 0
    sigma: float = 1.0
    orientation: float = 0.0
    response: float = 0.0
    source: str = "SIFT"

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("keypoint coordinates must be finite")
        if not 0.0 <= self.orientation < TWO_PI:
            raise ValueError(f"orientation {self.orientation} outside [0, 2pi)")
        if self.response < 0:
            raise ValueError("response must be nonnegative")
        if self.source not in ("SIFT", "ORB"):
            raise ValueError(f"unknown keypoint source {self.source!r}")


def wrap_angle(theta: float) -> float:
    """Map any angle to [0, 2pi), guarding the 2pi rounding edge."""
    wrapped = theta % TWO_PI
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def keypoint_to_dict(kp: Keypoint, descriptor=None) -> dict:
    """JSON-ready form; float descriptors as lists, binary as hex."""
    out = {
        "x": float(kp.x),
        "y": float(kp.y),
        "octave": int(kp.octave),
        "sigma": float(kp.sigma),
        "orientation": float(kp.orientation),
        "response": float(kp.response),
        "source": kp.source,
    }
    if descriptor is not None:
        arr = np.asarray(descriptor)
        if arr.dtype == np.uint8:
            out["descriptor"] = arr.tobytes().hex()
        else:
            out["descriptor"] = [float(v) for v in arr]
    return out

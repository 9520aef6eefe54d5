"""FAST-9/16 corner detection with arc-SAD scoring and 3x3 suppression."""

from __future__ import annotations

import numpy as np

from ..imgcore import Image
from .keypoint import Keypoint

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
CIRCLE_OFFSETS = (
    (0, -3), (1, -3), (2, -2), (3, -1),
    (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1),
    (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
ARC_LENGTH = 9


def fast_score_map(data: np.ndarray, threshold: float) -> np.ndarray:
    """Corner score per pixel; 0 where the segment test fails.

    A pixel passes when >= 9 contiguous circle pixels all exceed
    center + t or all fall below center - t. The score sums |v - center|
    over every circle pixel covered by some qualifying 9-arc.
    """
    h, w = data.shape
    scores = np.zeros((h, w))
    if h < 7 or w < 7:
        return scores
    center = data[3 : h - 3, 3 : w - 3]
    ring = np.stack(
        [data[3 + dy : h - 3 + dy, 3 + dx : w - 3 + dx] for dx, dy in CIRCLE_OFFSETS]
    )
    bright = ring > center + threshold
    dark = ring < center - threshold

    def arc_coverage(flags):
        # runs[s] = all 9 consecutive flags starting at s hold
        runs = np.ones_like(flags[:1].repeat(16, axis=0))
        for j in range(ARC_LENGTH):
            runs &= np.roll(flags, -j, axis=0)
        # covered[k] = circle pixel k belongs to some qualifying run
        covered = np.zeros_like(runs)
        for j in range(ARC_LENGTH):
            covered |= np.roll(runs, j, axis=0)
        return runs.any(axis=0), covered

    is_bright, bright_cover = arc_coverage(bright)
    is_dark, dark_cover = arc_coverage(dark)
    diff = np.abs(ring - center)
    inner = np.where(
        is_bright,
        (diff * bright_cover).sum(axis=0),
        np.where(is_dark, (diff * dark_cover).sum(axis=0), 0.0),
    )
    scores[3 : h - 3, 3 : w - 3] = inner
    return scores


def suppress_non_maxima(scores: np.ndarray) -> np.ndarray:
    """Keep positive scores that are >= all eight 3x3 neighbors."""
    padded = np.pad(scores, 1, mode="constant")
    keep = scores > 0
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            shifted = padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
            keep &= scores >= shifted
    return keep


def detect_fast(img: Image, threshold: float, source: str = "ORB"):
    """FAST corners sorted row-major; small images yield an empty list."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    scores = fast_score_map(img.data, threshold)
    keep = suppress_non_maxima(scores)
    ys, xs = np.nonzero(keep)
    return [
        Keypoint(float(x), float(y), octave=0, sigma=1.0, response=float(scores[y, x]), source=source)
        for y, x in zip(ys, xs)
    ]

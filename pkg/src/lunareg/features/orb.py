"""ORB: pyramid FAST corners ranked by Harris, oriented, rBRIEF-described."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from ..imgcore import Image, InterpMethod, blur_array, upscale
from .fast import fast_score_map, suppress_non_maxima
from .keypoint import Keypoint, wrap_angle

HARRIS_K = 0.04
HARRIS_WINDOW = 7
BRIEF_BLUR_SIGMA = 2.0


@dataclass(frozen=True)
class OrbConfig:
    n_features: int = 500
    pyramid_levels: int = 8
    scale_factor: float = 1.2
    fast_threshold: float = 0.08
    patch_size: int = 31
    brief_pairs: int = 256
    pattern_seed: int = 1913

    def __post_init__(self):
        if self.scale_factor <= 1.0:
            raise ValueError("scale_factor must exceed 1")
        if self.patch_size % 2 == 0 or self.patch_size < 3:
            raise ValueError("patch_size must be odd and >= 3")
        if min(self.n_features, self.pyramid_levels, self.brief_pairs) < 1:
            raise ValueError("counts must be positive")
        if self.fast_threshold <= 0:
            raise ValueError("fast_threshold must be positive")


def harris_response_map(data: np.ndarray) -> np.ndarray:
    """Harris corner measure det(M) - k trace(M)^2 over a 7x7 window."""
    dx = np.zeros_like(data)
    dy = np.zeros_like(data)
    dx[:, 1:-1] = 0.5 * (data[:, 2:] - data[:, :-2])
    dy[1:-1, :] = 0.5 * (data[2:, :] - data[:-2, :])

    kernel = np.ones(HARRIS_WINDOW)

    def box(a):
        out = correlate1d(a, kernel, axis=0, mode="constant")
        return correlate1d(out, kernel, axis=1, mode="constant")

    sxx = box(dx * dx)
    syy = box(dy * dy)
    sxy = box(dx * dy)
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    return det - HARRIS_K * trace * trace


def orientation_intensity_centroid(img: Image, kp: Keypoint, radius: int) -> float:
    """Patch orientation atan2(m01, m10); constant patches give 0."""
    data = img.data
    h, w = data.shape
    cx, cy = int(round(kp.x)), int(round(kp.y))
    offsets = np.arange(-radius, radius + 1)
    ox, oy = np.meshgrid(offsets, offsets)
    disk = ox * ox + oy * oy <= radius * radius
    xs = np.clip(cx + ox, 0, w - 1)
    ys = np.clip(cy + oy, 0, h - 1)
    patch = data[ys, xs]
    m10 = float((ox * patch)[disk].sum())
    m01 = float((oy * patch)[disk].sum())
    # constant patches leave only summation noise in the moments
    eps = 1e-9 * (1.0 + float(np.abs(patch[disk]).sum()))
    if abs(m10) < eps and abs(m01) < eps:
        return 0.0
    return wrap_angle(math.atan2(m01, m10))


_PATTERN_CACHE = {}


def brief_pattern(cfg: OrbConfig) -> np.ndarray:
    """Deterministic (pairs, 4) test-point offsets inside the patch."""
    key = (cfg.pattern_seed, cfg.patch_size, cfg.brief_pairs)
    if key not in _PATTERN_CACHE:
        rng = np.random.default_rng(cfg.pattern_seed)
        half = cfg.patch_size // 2
        sigma = cfg.patch_size / 5.0
        pts = rng.normal(0.0, sigma, size=(cfg.brief_pairs, 4))
        pattern = np.clip(pts, -half, half)
        pattern.setflags(write=False)
        _PATTERN_CACHE[key] = pattern
    return _PATTERN_CACHE[key]


def compute_rbrief(img_smoothed: Image, kp: Keypoint, cfg: OrbConfig) -> np.ndarray:
    """256 rotated intensity comparisons packed into 32 bytes."""
    pattern = brief_pattern(cfg)
    c, s = math.cos(kp.orientation), math.sin(kp.orientation)
    data = img_smoothed.data
    h, w = data.shape

    px = pattern[:, 0] * c - pattern[:, 1] * s + kp.x
    py = pattern[:, 0] * s + pattern[:, 1] * c + kp.y
    qx = pattern[:, 2] * c - pattern[:, 3] * s + kp.x
    qy = pattern[:, 2] * s + pattern[:, 3] * c + kp.y

    def sample(xs, ys):
        xi = np.clip(np.floor(xs + 0.5).astype(np.int64), 0, w - 1)
        yi = np.clip(np.floor(ys + 0.5).astype(np.int64), 0, h - 1)
        return data[yi, xi]

    bits = sample(px, py) < sample(qx, qy)
    return np.packbits(bits.astype(np.uint8))


def _pyramid(img: Image, cfg: OrbConfig):
    """Level images with their scale relative to the base."""
    levels = [(img, 1.0)]
    for level in range(1, cfg.pyramid_levels):
        scale = cfg.scale_factor**level
        if round(img.width / scale) < 7 or round(img.height / scale) < 7:
            break
        levels.append((upscale(img, 1.0 / scale, InterpMethod.BILINEAR), scale))
    return levels


def detect_orb(img: Image, cfg: OrbConfig = OrbConfig()):
    """ORB keypoints and descriptors in base-image coordinates.

    FAST runs per pyramid level, candidates are ordered by Harris
    response, the top n_features keep an intensity-centroid orientation
    and an rBRIEF descriptor sampled on the sigma=2 blurred level image.
    """
    candidates = []
    levels = _pyramid(img, cfg)
    for level_idx, (level_img, scale) in enumerate(levels):
        scores = fast_score_map(level_img.data, cfg.fast_threshold)
        keep = suppress_non_maxima(scores)
        ys, xs = np.nonzero(keep)
        if len(xs) == 0:
            continue
        harris = harris_response_map(level_img.data)
        for x, y in zip(xs, ys):
            candidates.append((float(harris[y, x]), level_idx, int(x), int(y)))

    # strongest Harris first; coordinates break exact ties deterministically
    candidates.sort(key=lambda c: (-c[0], c[1], c[3], c[2]))
    candidates = candidates[: cfg.n_features]

    smoothed = {}
    radius = cfg.patch_size // 2
    keypoints = []
    descriptors = []
    for response, level_idx, x, y in candidates:
        level_img, scale = levels[level_idx]
        kp_level = Keypoint(float(x), float(y), octave=level_idx, sigma=scale, source="ORB")
        theta = orientation_intensity_centroid(level_img, kp_level, radius)
        oriented = Keypoint(
            float(x), float(y), octave=level_idx, sigma=scale, orientation=theta, source="ORB"
        )
        if level_idx not in smoothed:
            smoothed[level_idx] = Image(
                np.clip(blur_array(level_img.data, BRIEF_BLUR_SIGMA), 0.0, 1.0)
            )
        descriptors.append(compute_rbrief(smoothed[level_idx], oriented, cfg))
        keypoints.append(
            Keypoint(
                (x + 0.5) * scale - 0.5,
                (y + 0.5) * scale - 0.5,
                octave=level_idx,
                sigma=scale,
                orientation=theta,
                response=max(response, 0.0),
                source="ORB",
            )
        )
    return keypoints, descriptors

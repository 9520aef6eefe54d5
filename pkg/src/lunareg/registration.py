"""Homography estimation (normalized DLT), RANSAC, and perspective warps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, NoConsensus, PointAtInfinity, TooFewMatches
from .imgcore import Image, bilinear_at
from .linalg import smallest_eigenvector

W_EPSILON = 1e-12


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, canonicalized to unit Frobenius norm, m[2][2] >= 0."""

    m: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got {m.shape}")
        norm = np.linalg.norm(m)
        if norm < W_EPSILON:
            raise DegenerateGeometry("zero homography matrix")
        m = m / norm
        if m[2, 2] < 0:
            m = -m
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateGeometry("homography is rank deficient")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def as_flat_list(self) -> list:
        """Row-major 9-element list for JSON serialization."""
        return [float(v) for v in self.m.reshape(-1)]

    @classmethod
    def from_flat_list(cls, values) -> "Homography":
        values = np.asarray(list(values), dtype=np.float64)
        if values.shape != (9,):
            raise ValueError(f"expected 9 values, got shape {values.shape}")
        return cls(values.reshape(3, 3))

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))


@dataclass(frozen=True)
class Correspondence:
    """Matched pixel locations, p1 in image 1 and p2 in image 2."""

    p1: tuple
    p2: tuple

    def __post_init__(self):
        p1 = (float(self.p1[0]), float(self.p1[1]))
        p2 = (float(self.p2[0]), float(self.p2[1]))
        if not all(math.isfinite(v) for v in p1 + p2):
            raise ValueError("correspondence coordinates must be finite")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold: float = 3.0
    max_iterations: int = 2000
    confidence: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie strictly between 0 and 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def _point_arrays(corrs):
    src = np.asarray([c.p1 for c in corrs], dtype=np.float64)
    dst = np.asarray([c.p2 for c in corrs], dtype=np.float64)
    return src, dst


def _normalization(points: np.ndarray) -> tuple:
    """Hartley transform: centroid to origin, mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_dist = np.linalg.norm(points - centroid, axis=1).mean()
    if mean_dist < W_EPSILON:
        raise DegenerateGeometry("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    t = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return (points - centroid) * s, t


def _any_triple_collinear(points: np.ndarray) -> bool:
    n = len(points)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                u = points[j] - points[i]
                v = points[k] - points[i]
                cross = u[0] * v[1] - u[1] * v[0]
                scale = np.linalg.norm(u) * np.linalg.norm(v)
                if abs(cross) <= 1e-9 * max(scale, W_EPSILON):
                    return True
    return False


def estimate_dlt(corrs) -> Homography:
    """Normalized direct linear transform over >= 4 correspondences."""
    corrs = list(corrs)
    if len(corrs) < 4:
        raise TooFewMatches(f"homography needs >= 4 correspondences, got {len(corrs)}")
    src, dst = _point_arrays(corrs)
    if len(corrs) == 4 and (_any_triple_collinear(src) or _any_triple_collinear(dst)):
        raise DegenerateGeometry("three of the four points are collinear")

    src_n, t1 = _normalization(src)
    dst_n, t2 = _normalization(dst)

    n = len(corrs)
    a = np.zeros((2 * n, 9))
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    a[0::2, 0] = -x
    a[0::2, 1] = -y
    a[0::2, 2] = -1.0
    a[0::2, 6] = u * x
    a[0::2, 7] = u * y
    a[0::2, 8] = u
    a[1::2, 3] = -x
    a[1::2, 4] = -y
    a[1::2, 5] = -1.0
    a[1::2, 6] = v * x
    a[1::2, 7] = v * y
    a[1::2, 8] = v

    h = smallest_eigenvector(a.T @ a)
    h_norm = h.reshape(3, 3)
    return Homography(np.linalg.inv(t2) @ h_norm @ t1)


def apply_homography(h: Homography, p) -> tuple:
    """Map one point through the homography; raises at the ideal line."""
    x, y = float(p[0]), float(p[1])
    m = h.m
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < W_EPSILON:
        raise PointAtInfinity(f"point {p} maps to infinity")
    return (
        (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
        (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w,
    )


def reprojection_error(h: Homography, corr: Correspondence) -> float:
    """Euclidean distance between H(p1) and p2."""
    qx, qy = apply_homography(h, corr.p1)
    return math.hypot(qx - corr.p2[0], qy - corr.p2[1])


def _forward_errors(m: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Reprojection error per correspondence; inf where w' vanishes."""
    ones = np.ones((len(src), 1))
    proj = np.hstack([src, ones]) @ m.T
    w = proj[:, 2]
    err = np.full(len(src), np.inf)
    ok = np.abs(w) >= W_EPSILON
    dx = proj[ok, 0] / w[ok] - dst[ok, 0]
    dy = proj[ok, 1] / w[ok] - dst[ok, 1]
    err[ok] = np.hypot(dx, dy)
    return err


def ransac_homography(corrs, cfg: RansacConfig):
    """Robust homography fit; returns (Homography, boolean inlier mask).

    Samples seeded 4-subsets, scores hypotheses by forward reprojection
    error, stops at the adaptive iteration bound, and refits by DLT on
    the best hypothesis's inliers.
    """
    corrs = list(corrs)
    n = len(corrs)
    if n < 4:
        raise TooFewMatches(f"RANSAC needs >= 4 correspondences, got {n}")
    src, dst = _point_arrays(corrs)
    rng = np.random.default_rng(cfg.seed)

    best_mask = None
    best_count = 0
    best_h = None
    bound = cfg.max_iterations
    trial = 0
    while trial < bound:
        trial += 1
        idx = rng.choice(n, size=4, replace=False)
        try:
            hyp = estimate_dlt([corrs[i] for i in idx])
        except DegenerateGeometry:
            continue
        mask = _forward_errors(hyp.m, src, dst) < cfg.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            best_h = hyp
            w = count / n
            if w >= 1.0:
                bound = trial
            else:
                needed = math.log(1.0 - cfg.confidence) / math.log(1.0 - w**4)
                bound = min(cfg.max_iterations, math.ceil(needed))

    if best_count < 4:
        raise NoConsensus("no hypothesis reached 4 inliers")
    inlier_corrs = [c for c, keep in zip(corrs, best_mask) if keep]
    try:
        final = estimate_dlt(inlier_corrs)
    except DegenerateGeometry:
        final = best_h
    return final, best_mask


def warp_perspective(img: Image, h: Homography, out_size) -> tuple:
    """Inverse-warp an image through H onto an out_size = (width, height) grid.

    Output pixels whose source location falls outside the input rectangle
    are 0 and flagged False in the returned validity mask.
    """
    out_w, out_h = int(out_size[0]), int(out_size[1])
    if out_w < 1 or out_h < 1:
        raise ValueError(f"degenerate output size {out_w}x{out_h}")
    inv = h.inverse().m

    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    w = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    finite = np.abs(w) >= W_EPSILON
    w_safe = np.where(finite, w, 1.0)
    sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / w_safe
    sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / w_safe

    h_in, w_in = img.shape
    valid = (
        finite
        & (sx >= 0.0)
        & (sx <= w_in - 1.0)
        & (sy >= 0.0)
        & (sy <= h_in - 1.0)
    )
    out = np.zeros((out_h, out_w))
    out[valid] = bilinear_at(img.data, sx[valid], sy[valid])
    return Image(np.clip(out, 0.0, 1.0)), valid

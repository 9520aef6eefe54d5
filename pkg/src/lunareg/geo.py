"""Spherical distances, geodesic pixel grids, footprint boxes, affine fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, TooFewMatches

LUNAR_RADIUS_KM = 1737.4
DEFAULT_GRID_STEP_PX = 100


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude in degrees on a sphere."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class GeoGrid:
    """Lattice of geodetic points sampled every ``step`` pixels.

    Node (row, col) sits at pixel (origin_x + col*step, origin_y + row*step).
    """

    points: tuple = field(repr=False)
    step: float = DEFAULT_GRID_STEP_PX
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.points)
        if len(rows) < 2 or any(len(r) < 2 for r in rows):
            raise ValueError("grid must be at least 2x2")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("grid rows must have equal length")
        if self.step <= 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        object.__setattr__(self, "points", rows)

    @property
    def shape(self) -> tuple:
        return (len(self.points), len(self.points[0]))

    def pixel_at(self, row: int, col: int) -> tuple:
        return (
            self.origin[0] + col * self.step,
            self.origin[1] + row * self.step,
        )


@dataclass(frozen=True)
class AffineTransform:
    """2x3 matrix [a b tx; c d ty] acting on row-vector points."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"expected a 2x3 matrix, got {m.shape}")
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) <= 1e-12:
            raise DegenerateGeometry(f"affine determinant {det} is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]


def haversine_distance(p1: GeoPoint, p2: GeoPoint, radius: float = LUNAR_RADIUS_KM) -> float:
    """Great-circle distance between two points on a sphere of ``radius``."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    phi1, phi2 = math.radians(p1.lat), math.radians(p2.lat)
    dphi = phi2 - phi1
    dlam = math.radians(p2.lon - p1.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * radius * math.asin(min(1.0, math.sqrt(h)))


def nearest_grid_pixel(grid: GeoGrid, target: GeoPoint, radius: float = LUNAR_RADIUS_KM):
    """Pixel coordinates of the lattice node closest to ``target``.

    Ties go to the earlier node in row-major order. Returns
    ``((x, y), distance_km)``.
    """
    best_pixel = None
    best_dist = math.inf
    for r, row in enumerate(grid.points):
        for c, node in enumerate(row):
            d = haversine_distance(node, target, radius)
            if d < best_dist:
                best_dist = d
                best_pixel = grid.pixel_at(r, c)
    return best_pixel, best_dist


def footprint_bbox(corners, bounds=None) -> tuple:
    """Axis-aligned (x0, y0, x1, y1) box around four corner points.

    ``bounds`` as (width, height) clamps the box to [0, width-1] x
    [0, height-1].
    """
    pts = np.asarray(corners, dtype=np.float64)
    if pts.shape != (4, 2) or not np.all(np.isfinite(pts)):
        raise ValueError("expected 4 finite (x, y) corner points")
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    if bounds is not None:
        w, h = bounds
        x0, x1 = np.clip([x0, x1], 0.0, w - 1.0)
        y0, y1 = np.clip([y0, y1], 0.0, h - 1.0)
    return (float(x0), float(y0), float(x1), float(y1))


def estimate_affine(pairs) -> AffineTransform:
    """Least-squares affine fit from (source, destination) point pairs.

    Builds the 2n x 6 design matrix and solves its 6x6 normal equations.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise TooFewMatches(f"affine fit needs >= 3 pairs, got {len(pairs)}")
    src = np.asarray([p[0] for p in pairs], dtype=np.float64)
    dst = np.asarray([p[1] for p in pairs], dtype=np.float64)

    n = len(pairs)
    design = np.zeros((2 * n, 6))
    design[0::2, 0] = src[:, 0]
    design[0::2, 1] = src[:, 1]
    design[0::2, 2] = 1.0
    design[1::2, 3] = src[:, 0]
    design[1::2, 4] = src[:, 1]
    design[1::2, 5] = 1.0
    rhs = dst.reshape(-1)

    normal = design.T @ design
    moment = normal[:3, :3]
    # collinear sources make the 3x3 moment block singular
    if abs(np.linalg.det(moment)) <= 1e-9 * max(1.0, np.abs(moment).max()) ** 3:
        raise DegenerateGeometry("source points are collinear")
    theta = np.linalg.solve(normal, design.T @ rhs)
    return AffineTransform(theta.reshape(2, 3))

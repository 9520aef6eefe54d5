"""Synthetic crater scenes, ground-truth warped pairs, benchmark sweeps."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LunaregError
from .imgcore import Image, InterpMethod
from .pipeline import Method, PipelineConfig, Status, upscale_register_evaluate
from .registration import Homography, apply_homography, warp_perspective

DOWNSAMPLE_FACTOR = 8
_FAILURE_ORDER = (Status.TOO_FEW_FEATURES.value, Status.NO_CONSENSUS.value, Status.DEGENERATE.value)


@dataclass(frozen=True)
class SceneConfig:
    size: int = 512
    n_craters: int = 200
    radius_min: float = 3.0
    radius_max: float = 30.0
    sun_elevation_deg: float = 70.0
    sun_azimuth_deg: float = 30.0
    noise_sigma: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.size < 64:
            raise ValueError("scene size must be at least 64 px")
        if self.n_craters < 0:
            raise ValueError("n_craters must be nonnegative")
        if not 0.0 < self.radius_min <= self.radius_max:
            raise ValueError("need 0 < radius_min <= radius_max")
        if self.radius_max >= self.size / 2:
            raise ValueError("crater radii must stay below half the scene size")
        if not 0.0 < self.sun_elevation_deg <= 90.0:
            raise ValueError("sun elevation must lie in (0, 90] degrees")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class PerturbConfig:
    max_rotation: float = 0.05
    max_translation: float = 12.0
    max_projective: float = 1e-5
    gain_range: tuple = (0.92, 1.08)
    bias_range: tuple = (-0.04, 0.04)
    noise_sigma: float = 0.003
    seed: int = 0

    def __post_init__(self):
        if min(self.max_rotation, self.max_translation, self.max_projective) < 0:
            raise ValueError("perturbation bounds must be nonnegative")
        if self.gain_range[0] > self.gain_range[1] or self.bias_range[0] > self.bias_range[1]:
            raise ValueError("gain and bias ranges must be ordered (low, high)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class BenchRow:
    method: str
    interp: str
    ssim: Optional[float]
    psnr_db: Optional[float]
    reprojection_error_px: Optional[float]
    status: str


def _sample_height(hfield: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear height lookup; locations off the field cannot occlude."""
    size_y, size_x = hfield.shape
    inside = (xs >= 0) & (xs <= size_x - 1) & (ys >= 0) & (ys <= size_y - 1)
    cx = np.clip(xs, 0.0, size_x - 1.0)
    cy = np.clip(ys, 0.0, size_y - 1.0)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, size_x - 1)
    y1 = np.minimum(y0 + 1, size_y - 1)
    fx = cx - x0
    fy = cy - y0
    v = (
        hfield[y0, x0] * (1 - fx) * (1 - fy)
        + hfield[y0, x1] * fx * (1 - fy)
        + hfield[y1, x0] * (1 - fx) * fy
        + hfield[y1, x1] * fx * fy
    )
    return np.where(inside, v, -np.inf)


def _shadow_mask(hfield: np.ndarray, azimuth_rad: float, elevation_rad: float) -> np.ndarray:
    """True where terrain toward the sun rises above the sun ray.

    Marches 1 px steps along the horizontal sun direction; a point at
    height h is lit once the ray clears the global maximum height 0.
    """
    tan_el = math.tan(elevation_rad)
    depth = -float(hfield.min())
    if depth <= 0.0 or elevation_rad >= math.pi / 2:
        return np.zeros(hfield.shape, dtype=bool)
    ux = math.cos(azimuth_rad)
    uy = math.sin(azimuth_rad)
    size_y, size_x = hfield.shape
    ys, xs = np.mgrid[0:size_y, 0:size_x].astype(np.float64)
    shadowed = np.zeros(hfield.shape, dtype=bool)
    t = 1.0
    while t * tan_el < depth:
        ray_height = hfield + t * tan_el
        sampled = _sample_height(hfield, xs + t * ux, ys + t * uy)
        shadowed |= sampled > ray_height
        t += 1.0
    return shadowed


def generate_crater_scene(cfg: SceneConfig) -> Image:
    """Lambertian-shaded hemispherical craters with cast shadows.

    Exposure is normalized so flat ground renders at 0.9 regardless of
    sun elevation; contrast then comes from slopes and shadows alone.
    """
    rng = np.random.default_rng(cfg.seed)
    size = cfg.size
    hfield = np.zeros((size, size))
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(cfg.n_craters):
        cx = rng.uniform(0.0, size - 1.0)
        cy = rng.uniform(0.0, size - 1.0)
        r = rng.uniform(cfg.radius_min, cfg.radius_max)
        d2 = (xs - cx) ** 2 + (ys - cy) ** 2
        bowl = -np.sqrt(np.maximum(r * r - d2, 0.0))
        hfield = np.minimum(hfield, bowl)

    gy, gx = np.gradient(hfield)
    norm = np.sqrt(gx * gx + gy * gy + 1.0)
    el = math.radians(cfg.sun_elevation_deg)
    az = math.radians(cfg.sun_azimuth_deg)
    sun = (math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el))
    lambert = np.maximum(0.0, (-gx * sun[0] - gy * sun[1] + sun[2]) / norm)
    shade = np.clip(0.9 * lambert / math.sin(el), 0.0, 1.0)
    shade[_shadow_mask(hfield, az, el)] = 0.0
    if cfg.noise_sigma > 0:
        shade = shade + rng.normal(0.0, cfg.noise_sigma, shade.shape)
    return Image(np.clip(shade, 0.0, 1.0))


def perturb_pair(img: Image, cfg: PerturbConfig):
    """Warp img by a bounded random homography; returns (warped, exact H)."""
    rng = np.random.default_rng(cfg.seed)
    theta = rng.uniform(-cfg.max_rotation, cfg.max_rotation)
    tx = rng.uniform(-cfg.max_translation, cfg.max_translation)
    ty = rng.uniform(-cfg.max_translation, cfg.max_translation)
    p1 = rng.uniform(-cfg.max_projective, cfg.max_projective)
    p2 = rng.uniform(-cfg.max_projective, cfg.max_projective)
    gain = rng.uniform(cfg.gain_range[0], cfg.gain_range[1])
    bias = rng.uniform(cfg.bias_range[0], cfg.bias_range[1])

    cx = (img.width - 1) / 2.0
    cy = (img.height - 1) / 2.0
    c, s = math.cos(theta), math.sin(theta)
    rotate = np.array(
        [
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ]
    )
    shift = np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
    tilt = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [p1, p2, 1.0]])
    h = Homography(shift @ rotate @ tilt)

    warped, _ = warp_perspective(img, h, (img.width, img.height))
    data = np.clip(warped.data * gain + bias, 0.0, 1.0)
    if cfg.noise_sigma > 0:
        data = np.clip(data + rng.normal(0.0, cfg.noise_sigma, data.shape), 0.0, 1.0)
    return Image(data), h


def box_downsample(img: Image, factor: int = DOWNSAMPLE_FACTOR) -> Image:
    """Mean over factor x factor blocks; dims must divide evenly."""
    if img.height % factor or img.width % factor:
        raise ValueError(f"image dims {img.shape} not divisible by {factor}")
    data = img.data.reshape(img.height // factor, factor, img.width // factor, factor)
    return Image(data.mean(axis=(1, 3)))


def make_scene_pairs(n_pairs: int, seed: int = 0, size: int = 512, elevation_range=(60.0, 80.0)):
    """Seeded (low, high, ground-truth H) triples for the benchmark.

    The high member is the pristine scene; the low member is the warped
    scene box-downsampled 8x. The stored H maps the upscaled low frame
    onto the high frame, which is what registration should recover.
    """
    master = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        elevation = master.uniform(elevation_range[0], elevation_range[1])
        azimuth = master.uniform(0.0, 360.0)
        scene_seed = int(master.integers(2**31))
        perturb_seed = int(master.integers(2**31))
        scene = generate_crater_scene(
            SceneConfig(size=size, sun_elevation_deg=elevation, sun_azimuth_deg=azimuth, seed=scene_seed)
        )
        warped, h = perturb_pair(scene, PerturbConfig(seed=perturb_seed))
        pairs.append((box_downsample(warped), scene, h.inverse()))
    return pairs


def corner_reprojection_error(estimated: Homography, truth: Homography, width: int, height: int) -> float:
    """Mean distance between the two mappings over the four frame corners."""
    corners = [(0.0, 0.0), (width - 1.0, 0.0), (0.0, height - 1.0), (width - 1.0, height - 1.0)]
    total = 0.0
    for pt in corners:
        ex, ey = apply_homography(estimated, pt)
        tx_, ty_ = apply_homography(truth, pt)
        total += math.hypot(ex - tx_, ey - ty_)
    return total / len(corners)


def run_benchmark(pairs, methods=None, interps=None, cfg: PipelineConfig = PipelineConfig()):
    """Sweep every (method, interp) cell over the pairs; never aborts.

    Returns BenchRows with per-cell mean SSIM/PSNR over successful pairs
    and mean corner reprojection error where ground truth is available.
    Cells where every pair failed carry the most common failure status.
    """
    if not pairs:
        raise ValueError("benchmark needs at least one pair")
    methods = list(methods) if methods else [Method.SIFT, Method.ORB, Method.INTFEAT]
    interps = list(interps) if interps else [InterpMethod.BILINEAR, InterpMethod.BICUBIC]
    rows = []
    for method in methods:
        for interp in interps:
            ssims, psnrs, reprojs, failures = [], [], [], []
            for low, high, truth in pairs:
                try:
                    _, rep = upscale_register_evaluate(low, high, method, interp, cfg)
                except LunaregError:
                    failures.append(Status.DEGENERATE.value)
                    continue
                if rep.status != Status.OK.value:
                    failures.append(rep.status)
                    continue
                ssims.append(rep.ssim)
                psnrs.append(rep.psnr_db)
                if truth is not None:
                    estimated = Homography.from_flat_list(rep.homography)
                    reprojs.append(corner_reprojection_error(estimated, truth, high.width, high.height))
            if ssims:
                rows.append(
                    BenchRow(
                        method=method.value,
                        interp=interp.value,
                        ssim=float(np.mean(ssims)),
                        psnr_db=float(np.mean(psnrs)),
                        reprojection_error_px=float(np.mean(reprojs)) if reprojs else None,
                        status=Status.OK.value,
                    )
                )
            else:
                counts = Counter(failures)
                status = max(_FAILURE_ORDER, key=lambda s: (counts.get(s, 0), -_FAILURE_ORDER.index(s)))
                rows.append(BenchRow(method.value, interp.value, None, None, None, status))
    return rows


def _fmt(value, digits):
    if value is None:
        return ""
    if math.isinf(value):
        return "inf"
    return f"{value:.{digits}f}"


def rows_to_csv(rows) -> str:
    """CSV text with the header `method,interp,ssim,psnr_db,reproj_px,status`."""
    lines = ["method,interp,ssim,psnr_db,reproj_px,status"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    row.method,
                    row.interp,
                    _fmt(row.ssim, 6),
                    _fmt(row.psnr_db, 4),
                    _fmt(row.reprojection_error_px, 4),
                    row.status,
                ]
            )
        )
    return "\n".join(lines) + "\n"

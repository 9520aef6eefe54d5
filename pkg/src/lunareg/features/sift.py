"""SIFT: DoG scale space, subpixel keypoints, oriented 128-d descriptors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..imgcore import Image, blur_array
from .keypoint import TWO_PI, Keypoint, wrap_angle

IMG_BORDER = 5
MAX_REFINE_STEPS = 5
ASSUMED_INPUT_SIGMA = 0.5
ORI_SIGMA_FACTOR = 1.5
ORI_RADIUS_FACTOR = 3.0
DESCR_WIDTH = 4
DESCR_BINS = 8
DESCR_CELL_SCALE = 3.0
DESCR_CLAMP = 0.2
MIN_DETECT_SIZE = 32


@dataclass(frozen=True)
class SiftConfig:
    octaves: int = 4
    scales_per_octave: int = 3
    sigma0: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    orientation_bins: int = 36
    peak_ratio: float = 0.8

    def __post_init__(self):
        positive = (
            self.octaves,
            self.scales_per_octave,
            self.sigma0,
            self.contrast_threshold,
            self.orientation_bins,
            self.peak_ratio,
        )
        if any(v <= 0 for v in positive):
            raise ValueError("all SIFT parameters must be positive")
        if self.edge_ratio <= 1.0:
            raise ValueError("edge_ratio must exceed 1")


def build_gaussian_pyramid(data: np.ndarray, cfg: SiftConfig):
    """Per octave scales_per_octave + 3 progressively blurred images."""
    s = cfg.scales_per_octave
    k = 2.0 ** (1.0 / s)
    base_boost = math.sqrt(max(cfg.sigma0**2 - ASSUMED_INPUT_SIGMA**2, 0.01))
    current = blur_array(data, base_boost)
    increments = [
        cfg.sigma0 * k ** (i - 1) * math.sqrt(k * k - 1.0) for i in range(1, s + 3)
    ]
    pyramid = []
    for _ in range(cfg.octaves):
        if min(current.shape) < 2 * IMG_BORDER + 3:
            break
        octave = [current]
        for inc in increments:
            octave.append(blur_array(octave[-1], inc))
        pyramid.append(octave)
        current = octave[s][::2, ::2]
    return pyramid


def build_dog_pyramid(gaussians):
    return [[octave[i + 1] - octave[i] for i in range(len(octave) - 1)] for octave in gaussians]


def _extremum_candidates(dog_octave, layer: int, threshold: float):
    """Integer positions that beat all 26 scale-space neighbors."""
    prev_l, cur, next_l = dog_octave[layer - 1], dog_octave[layer], dog_octave[layer + 1]
    h, w = cur.shape
    c = cur[1:-1, 1:-1]
    nmax = np.full(c.shape, -np.inf)
    nmin = np.full(c.shape, np.inf)
    for layer_img in (prev_l, cur, next_l):
        for dy in range(3):
            for dx in range(3):
                if layer_img is cur and dy == 1 and dx == 1:
                    continue
                view = layer_img[dy : h - 2 + dy, dx : w - 2 + dx]
                np.maximum(nmax, view, out=nmax)
                np.minimum(nmin, view, out=nmin)
    strong = np.abs(c) > threshold
    is_ext = strong & (((c > 0) & (c >= nmax)) | ((c < 0) & (c <= nmin)))
    ys, xs = np.nonzero(is_ext)
    ys += 1
    xs += 1
    keep = (
        (xs >= IMG_BORDER)
        & (xs < w - IMG_BORDER)
        & (ys >= IMG_BORDER)
        & (ys < h - IMG_BORDER)
    )
    return ys[keep], xs[keep]


def _refine_extremum(dog_octave, layer, y, x, cfg):
    """Quadratic subpixel fit; returns (x, y, layer, offsets, contrast) or None."""
    s = cfg.scales_per_octave
    h, w = dog_octave[0].shape
    for _ in range(MAX_REFINE_STEPS):
        d0, d1, d2 = dog_octave[layer - 1], dog_octave[layer], dog_octave[layer + 1]
        dx = 0.5 * (d1[y, x + 1] - d1[y, x - 1])
        dy = 0.5 * (d1[y + 1, x] - d1[y - 1, x])
        ds = 0.5 * (d2[y, x] - d0[y, x])
        dxx = d1[y, x + 1] + d1[y, x - 1] - 2.0 * d1[y, x]
        dyy = d1[y + 1, x] + d1[y - 1, x] - 2.0 * d1[y, x]
        dss = d2[y, x] + d0[y, x] - 2.0 * d1[y, x]
        dxy = 0.25 * (d1[y + 1, x + 1] - d1[y + 1, x - 1] - d1[y - 1, x + 1] + d1[y - 1, x - 1])
        dxs = 0.25 * (d2[y, x + 1] - d2[y, x - 1] - d0[y, x + 1] + d0[y, x - 1])
        dys = 0.25 * (d2[y + 1, x] - d2[y - 1, x] - d0[y + 1, x] + d0[y - 1, x])
        hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
        grad = np.array([dx, dy, ds])
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if np.all(np.abs(offset) < 0.5):
            contrast = d1[y, x] + 0.5 * float(grad @ offset)
            if abs(contrast) < cfg.contrast_threshold:
                return None
            trace = dxx + dyy
            det = dxx * dyy - dxy * dxy
            r = cfg.edge_ratio
            if det <= 0 or trace * trace / det >= (r + 1.0) ** 2 / r:
                return None
            return x, y, layer, offset, abs(contrast)
        x += int(round(offset[0]))
        y += int(round(offset[1]))
        layer += int(round(offset[2]))
        if (
            layer < 1
            or layer > s
            or x < IMG_BORDER
            or x >= w - IMG_BORDER
            or y < IMG_BORDER
            or y >= h - IMG_BORDER
        ):
            return None
    return None


def _orientation_histogram(gauss, x, y, sigma_oct, cfg):
    """Gaussian-weighted gradient histogram around an integer center."""
    nbins = cfg.orientation_bins
    sigma_w = ORI_SIGMA_FACTOR * sigma_oct
    radius = int(round(ORI_RADIUS_FACTOR * sigma_w))
    h, w = gauss.shape
    cx, cy = int(round(x)), int(round(y))
    y0, y1 = max(cy - radius, 1), min(cy + radius, h - 2)
    x0, x1 = max(cx - radius, 1), min(cx + radius, w - 2)
    if y1 < y0 or x1 < x0:
        return None
    region_dx = gauss[y0 : y1 + 1, x0 + 1 : x1 + 2] - gauss[y0 : y1 + 1, x0 - 1 : x1]
    region_dy = gauss[y0 + 1 : y1 + 2, x0 : x1 + 1] - gauss[y0 - 1 : y1, x0 : x1 + 1]
    mag = np.hypot(region_dx, region_dy)
    ang = np.mod(np.arctan2(region_dy, region_dx), TWO_PI)
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    weight = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma_w**2))
    bins = np.round(ang * nbins / TWO_PI).astype(np.int64) % nbins
    hist = np.bincount(bins.ravel(), weights=(mag * weight).ravel(), minlength=nbins)
    # circular smoothing with the binomial 5-tap kernel
    smooth = (
        6.0 * hist
        + 4.0 * (np.roll(hist, 1) + np.roll(hist, -1))
        + (np.roll(hist, 2) + np.roll(hist, -2))
    ) / 16.0
    return smooth


def _orientation_peaks(hist, cfg):
    nbins = cfg.orientation_bins
    peak = hist.max()
    if peak <= 0:
        return [0.0]
    thetas = []
    for b in range(nbins):
        left = hist[(b - 1) % nbins]
        right = hist[(b + 1) % nbins]
        if hist[b] >= cfg.peak_ratio * peak and hist[b] > left and hist[b] > right:
            denom = left - 2.0 * hist[b] + right
            shift = 0.0 if denom == 0 else 0.5 * (left - right) / denom
            thetas.append(wrap_angle((b + shift) * TWO_PI / nbins))
    return thetas or [0.0]


def _descriptor(gauss, x, y, sigma_oct, theta, _cfg):
    """4x4x8 gradient histogram with trilinear scatter; None if degenerate."""
    d, nbins = DESCR_WIDTH, DESCR_BINS
    hist_width = DESCR_CELL_SCALE * sigma_oct
    radius = int(round(hist_width * math.sqrt(2.0) * (d + 1) * 0.5))
    h, w = gauss.shape
    cx, cy = int(round(x)), int(round(y))
    y0, y1 = max(cy - radius, 1), min(cy + radius, h - 2)
    x0, x1 = max(cx - radius, 1), min(cx + radius, w - 2)
    if y1 < y0 or x1 < x0:
        return None

    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    j = (xs - x).ravel()
    i = (ys - y).ravel()
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    c_rot = (j * cos_t + i * sin_t) / hist_width
    r_rot = (-j * sin_t + i * cos_t) / hist_width
    rbin = r_rot + d / 2.0 - 0.5
    cbin = c_rot + d / 2.0 - 0.5
    inside = (rbin > -1) & (rbin < d) & (cbin > -1) & (cbin < d)
    if not inside.any():
        return None

    gdx = (gauss[y0 : y1 + 1, x0 + 1 : x1 + 2] - gauss[y0 : y1 + 1, x0 - 1 : x1]).ravel()
    gdy = (gauss[y0 + 1 : y1 + 2, x0 : x1 + 1] - gauss[y0 - 1 : y1, x0 : x1 + 1]).ravel()
    rbin, cbin = rbin[inside], cbin[inside]
    gdx, gdy = gdx[inside], gdy[inside]
    r_rot, c_rot = r_rot[inside], c_rot[inside]

    mag = np.hypot(gdx, gdy) * np.exp(-(r_rot**2 + c_rot**2) / (0.5 * d * d))
    obin = np.mod(np.arctan2(gdy, gdx) - theta, TWO_PI) * nbins / TWO_PI

    r0 = np.floor(rbin).astype(np.int64)
    c0 = np.floor(cbin).astype(np.int64)
    o0 = np.floor(obin).astype(np.int64)
    fr = rbin - r0
    fc = cbin - c0
    fo = obin - o0

    acc = np.zeros((d + 2, d + 2, nbins))
    for dr in (0, 1):
        wr = mag * (fr if dr else 1.0 - fr)
        for dc in (0, 1):
            wc = wr * (fc if dc else 1.0 - fc)
            for do in (0, 1):
                wo = wc * (fo if do else 1.0 - fo)
                np.add.at(acc, (r0 + dr + 1, c0 + dc + 1, (o0 + do) % nbins), wo)
    raw = acc[1 : d + 1, 1 : d + 1, :].ravel()

    norm = np.linalg.norm(raw)
    if norm < 1e-12:
        return None
    vec = raw / norm
    # clamp and renormalize until the cap and the unit norm both hold
    for _ in range(100):
        if vec.max() <= DESCR_CLAMP + 1e-5:
            return vec
        clipped = np.minimum(vec, DESCR_CLAMP)
        norm = np.linalg.norm(clipped)
        if norm < 1e-12:
            return None
        vec = clipped / norm
    return None


def detect_sift(img: Image, cfg: SiftConfig = SiftConfig()):
    """SIFT keypoints and unit-norm descriptors in base coordinates.

    Images smaller than 32x32 yield no detections.
    """
    if min(img.shape) < MIN_DETECT_SIZE:
        return [], []
    s = cfg.scales_per_octave
    gaussians = build_gaussian_pyramid(img.data, cfg)
    dogs = build_dog_pyramid(gaussians)
    prefilter = 0.5 * cfg.contrast_threshold / s

    keypoints = []
    descriptors = []
    for octave_idx, dog_octave in enumerate(dogs):
        octave_scale = 2.0**octave_idx
        for layer in range(1, s + 1):
            ys, xs = _extremum_candidates(dog_octave, layer, prefilter)
            for y, x in zip(ys.tolist(), xs.tolist()):
                refined = _refine_extremum(dog_octave, layer, y, x, cfg)
                if refined is None:
                    continue
                rx, ry, rlayer, offset, response = refined
                layer_f = rlayer + offset[2]
                sigma_oct = cfg.sigma0 * 2.0 ** (layer_f / s)
                gauss = gaussians[octave_idx][int(round(np.clip(layer_f, 1, s)))]
                fx, fy = rx + offset[0], ry + offset[1]
                hist = _orientation_histogram(gauss, fx, fy, sigma_oct, cfg)
                if hist is None:
                    continue
                for theta in _orientation_peaks(hist, cfg):
                    desc = _descriptor(gauss, fx, fy, sigma_oct, theta, cfg)
                    if desc is None:
                        continue
                    keypoints.append(
                        Keypoint(
                            fx * octave_scale,
                            fy * octave_scale,
                            octave=octave_idx,
                            sigma=sigma_oct * octave_scale,
                            orientation=theta,
                            response=response,
                            source="SIFT",
                        )
                    )
                    descriptors.append(desc)
    return keypoints, descriptors

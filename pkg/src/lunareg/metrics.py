"""Quality and retrieval metrics: MSE, PSNR, SSIM, AP and mAP."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .imgcore import Image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


class Scale(enum.Enum):
    """Value scale metrics are computed on."""

    UNIT = "UNIT"
    EIGHTBIT = "EIGHTBIT"


class SsimMode(enum.Enum):
    GLOBAL = "GLOBAL"
    WINDOWED = "WINDOWED"


@dataclass(frozen=True)
class SsimParams:
    """Stabilization constants and evaluation mode for ssim.

    c1 and c2 derive from (k1, k2, L) and cannot be set independently.
    L = 1.0 evaluates on raw intensities; L = 255 on 8-bit values.
    """

    k1: float = 0.01
    k2: float = 0.03
    L: float = 1.0
    mode: SsimMode = SsimMode.GLOBAL

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0 or self.L <= 0:
            raise ValueError("k1, k2 and L must all be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.L) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.L) ** 2


@dataclass(frozen=True)
class RetrievalRanking:
    """Binary relevance flags per rank plus the total relevant count."""

    flags: tuple
    total_relevant: int

    def __post_init__(self):
        flags = tuple(int(f) for f in self.flags)
        if any(f not in (0, 1) for f in flags):
            raise ValueError("relevance flags must be 0 or 1")
        if self.total_relevant < sum(flags):
            raise ValueError("total_relevant is below the number of relevant flags")
        object.__setattr__(self, "flags", flags)


def _check_same_shape(a: Image, b: Image):
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")


def _values(img: Image, scale: Scale) -> np.ndarray:
    if scale is Scale.UNIT:
        return img.data
    # 8-bit values kept as float64 so squared errors stay exact
    return np.floor(img.data * 255.0 + 0.5)


def mse(i: Image, k: Image, scale: Scale = Scale.UNIT) -> float:
    """Mean squared error over all pixels on the requested scale."""
    _check_same_shape(i, k)
    diff = _values(i, scale) - _values(k, scale)
    return float(np.mean(diff * diff))


def psnr(i: Image, k: Image, scale: Scale = Scale.UNIT) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images match."""
    err = mse(i, k, scale)
    if err == 0.0:
        return math.inf
    peak = 255.0 if scale is Scale.EIGHTBIT else 1.0
    return 10.0 * math.log10(peak * peak / err)


def _ssim_formula(mu_x, mu_y, var_x, var_y, cov, c1, c2):
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def _windowed_stats(x: np.ndarray, y: np.ndarray):
    """Gaussian-weighted means/variances/covariance over full windows."""
    half = SSIM_WINDOW // 2
    taps = np.exp(-((np.arange(SSIM_WINDOW) - half) ** 2) / (2.0 * SSIM_SIGMA**2))
    taps /= taps.sum()

    def smooth(a):
        out = correlate1d(a, taps, axis=0, mode="constant")
        out = correlate1d(out, taps, axis=1, mode="constant")
        return out[half:-half, half:-half]

    mu_x = smooth(x)
    mu_y = smooth(y)
    var_x = smooth(x * x) - mu_x * mu_x
    var_y = smooth(y * y) - mu_y * mu_y
    cov = smooth(x * y) - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def ssim(x: Image, y: Image, params: SsimParams = SsimParams()) -> float:
    """Structural similarity on whole-image or sliding-window statistics."""
    _check_same_shape(x, y)
    scale = Scale.EIGHTBIT if params.L == 255.0 else Scale.UNIT
    xv = _values(x, scale)
    yv = _values(y, scale)
    if params.mode is SsimMode.GLOBAL:
        mu_x, mu_y = xv.mean(), yv.mean()
        var_x = (xv * xv).mean() - mu_x * mu_x
        var_y = (yv * yv).mean() - mu_y * mu_y
        cov = (xv * yv).mean() - mu_x * mu_y
        return float(_ssim_formula(mu_x, mu_y, var_x, var_y, cov, params.c1, params.c2))
    if x.height < SSIM_WINDOW or x.width < SSIM_WINDOW:
        raise ValueError(f"windowed ssim needs dims >= {SSIM_WINDOW}, got {x.shape}")
    stats = _windowed_stats(xv, yv)
    return float(np.mean(_ssim_formula(*stats, params.c1, params.c2)))


def average_precision(ranking: RetrievalRanking) -> float:
    """Precision at each relevant rank, averaged over all relevant items."""
    if ranking.total_relevant < 1:
        raise ValueError("average precision is undefined with no relevant items")
    hits = 0
    total = 0.0
    for k, rel in enumerate(ranking.flags, start=1):
        if rel:
            hits += 1
            total += hits / k
    return total / ranking.total_relevant


def mean_average_precision(aps) -> float:
    """Arithmetic mean of per-query average precisions."""
    aps = list(aps)
    if not aps:
        raise ValueError("need at least one AP value")
    return float(np.mean(aps))

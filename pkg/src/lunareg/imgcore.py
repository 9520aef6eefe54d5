"""Grayscale image type, 8-bit PGM/PNG I/O, Gaussian blur, and resampling.

Intensities live in [0,1] as float64; 8-bit values appear only at the
file boundary. All resampling uses half-pixel-center coordinates and
clamp-to-edge borders.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PILImage
from scipy.ndimage import correlate1d

from .errors import ImageFormatError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class InterpMethod(enum.Enum):
    """Resampling operator used by upscale."""

    BILINEAR = "BILINEAR"
    BICUBIC = "BICUBIC"


@dataclass(frozen=True)
class Image:
    """Immutable grayscale raster with row-major float64 data in [0,1]."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2D array, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"degenerate image shape {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities must lie in [0,1]")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple:
        return self.data.shape


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Map [0,1] intensities to bytes, rounding halves up."""
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(v * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()

    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(blob):
            ch = blob[pos : pos + 1]
            if ch == b"#":
                while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header")
        return blob[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ImageFormatError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = blob[pos : pos + width * height]
    if len(raster) != width * height:
        raise ImageFormatError(f"{path}: PGM raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)


def _read_png(path: str) -> np.ndarray:
    try:
        with _PILImage.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: unreadable PNG ({exc})") from exc
    if mode == "L":
        return arr.astype(np.float64)
    if mode == "RGB":
        rgb = arr.astype(np.float64)
        r, g, b = LUMA_WEIGHTS
        return r * rgb[:, :, 0] + g * rgb[:, :, 1] + b * rgb[:, :, 2]
    raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r} (need 8-bit L or RGB)")


def load_image(path) -> Image:
    """Read an 8-bit PGM or PNG file as a normalized grayscale image."""
    path = str(path)
    lower = path.lower()
    try:
        if lower.endswith(".pgm"):
            raw = _read_pgm(path)
        elif lower.endswith(".png"):
            raw = _read_png(path)
        else:
            raise ImageFormatError(f"{path}: unsupported extension (need .pgm or .png)")
    except FileNotFoundError as exc:
        raise ImageFormatError(f"{path}: {exc.strerror}") from exc
    return Image(raw / 255.0)


def save_image(img: Image, path) -> None:
    """Write an image as 8-bit PGM or PNG, chosen by file extension."""
    path = str(path)
    lower = path.lower()
    byte_data = quantize_u8(img.data)
    if lower.endswith(".pgm"):
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(byte_data.tobytes())
    elif lower.endswith(".png"):
        _PILImage.fromarray(byte_data, mode="L").save(path, format="PNG")
    else:
        raise ImageFormatError(f"{path}: unsupported extension (need .pgm or .png)")


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian taps with radius ceil(3*sigma)."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def blur_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a float array, clamp-to-edge borders."""
    kernel = gaussian_kernel1d(sigma)
    out = correlate1d(np.asarray(arr, dtype=np.float64), kernel, axis=0, mode="nearest")
    return correlate1d(out, kernel, axis=1, mode="nearest")


def gaussian_blur(img: Image, sigma: float) -> Image:
    """Gaussian-blur an image; kernel radius ceil(3*sigma), sum 1."""
    return Image(np.clip(blur_array(img.data, sigma), 0.0, 1.0))


def bilinear_at(arr: np.ndarray, x, y):
    """Vectorized 4-neighbor interpolation with clamp-to-edge."""
    a = np.asarray(arr, dtype=np.float64)
    h, w = a.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0 = np.clip(np.floor(x), 0, w - 1).astype(np.int64)
    y0 = np.clip(np.floor(y), 0, h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(x - x0, 0.0, 1.0)
    fy = np.clip(y - y0, 0.0, 1.0)
    p00 = a[y0, x0]
    p10 = a[y0, x1]
    p01 = a[y1, x0]
    p11 = a[y1, x1]
    top = p00 + fx * (p10 - p00)
    bot = p01 + fx * (p11 - p01)
    return top + fy * (bot - top)


def cubic_weights(t):
    """Keys cubic convolution weights (a = -0.5) for fractional offset t."""
    t = np.asarray(t, dtype=np.float64)
    a = -0.5
    d = np.stack([t + 1.0, t, 1.0 - t, 2.0 - t], axis=-1)
    d = np.abs(d)
    near = (a + 2.0) * d**3 - (a + 3.0) * d**2 + 1.0
    far = a * d**3 - 5.0 * a * d**2 + 8.0 * a * d - 4.0 * a
    return np.where(d <= 1.0, near, np.where(d < 2.0, far, 0.0))


def bicubic_at(arr: np.ndarray, x, y):
    """Vectorized 16-neighbor Keys interpolation, clamped to [0,1]."""
    a = np.asarray(arr, dtype=np.float64)
    h, w = a.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0 = np.floor(x)
    y0 = np.floor(y)
    wx = cubic_weights(x - x0)
    wy = cubic_weights(y - y0)
    acc = np.zeros(np.broadcast(x, y).shape, dtype=np.float64)
    for j in range(4):
        yy = np.clip(y0.astype(np.int64) + (j - 1), 0, h - 1)
        row = np.zeros_like(acc)
        for i in range(4):
            xx = np.clip(x0.astype(np.int64) + (i - 1), 0, w - 1)
            row += wx[..., i] * a[yy, xx]
        acc += wy[..., j] * row
    return np.clip(acc, 0.0, 1.0)


def sample_bilinear(img: Image, x: float, y: float) -> float:
    """Bilinear sample at continuous (x, y); borders clamp to edge."""
    return float(bilinear_at(img.data, x, y))


def sample_bicubic(img: Image, x: float, y: float) -> float:
    """Bicubic (Keys a=-0.5) sample at continuous (x, y), clamped to [0,1]."""
    return float(bicubic_at(img.data, x, y))


def round_half_up(value: float) -> int:
    """Round to nearest integer with halves going up."""
    return int(math.floor(value + 0.5))


def upscale(img: Image, factor: float, method: InterpMethod) -> Image:
    """Resample to round(factor*dims) using half-pixel-center mapping."""
    if factor <= 0.0:
        raise ValueError(f"factor must be positive, got {factor}")
    out_w = round_half_up(factor * img.width)
    out_h = round_half_up(factor * img.height)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"degenerate output size {out_w}x{out_h}")
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) / factor - 0.5
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) / factor - 0.5
    grid_x, grid_y = np.meshgrid(xs, ys)
    if method is InterpMethod.BILINEAR:
        out = bilinear_at(img.data, grid_x, grid_y)
    elif method is InterpMethod.BICUBIC:
        out = bicubic_at(img.data, grid_x, grid_y)
    else:
        raise ValueError(f"unknown interpolation method {method!r}")
    return Image(np.clip(out, 0.0, 1.0))

import math

import numpy as np
import pytest
from PIL import Image as PILImage

from lunareg.errors import ImageFormatError
from lunareg.imgcore import (
    Image,
    InterpMethod,
    bilinear_at,
    gaussian_blur,
    load_image,
    quantize_u8,
    sample_bicubic,
    sample_bilinear,
    save_image,
    upscale,
)


def write_pgm(path, width, height, payload):
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode())
        fh.write(bytes(payload))


class TestImageType:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Image(np.array([[1.5]]))
        with pytest.raises(ValueError):
            Image(np.array([[-0.1]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            Image(np.zeros(4))

    def test_data_is_read_only(self):
        img = Image(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0

    def test_dimensions(self):
        img = Image(np.zeros((3, 5)))
        assert img.width == 5
        assert img.height == 3


class TestLoadSave:
    def test_loads_2x2_pgm(self, tmp_path):
        p = tmp_path / "t.pgm"
        write_pgm(p, 2, 2, [0, 255, 0, 255])
        img = load_image(p)
        assert np.array_equal(img.data, [[0.0, 1.0], [0.0, 1.0]])

    def test_loads_all_zero_pgm(self, tmp_path):
        p = tmp_path / "z.pgm"
        write_pgm(p, 8, 8, [0] * 64)
        assert np.array_equal(load_image(p).data, np.zeros((8, 8)))

    def test_pgm_header_comments(self, tmp_path):
        p = tmp_path / "c.pgm"
        with open(p, "wb") as fh:
            fh.write(b"P5\n# a comment\n2 1\n255\n")
            fh.write(bytes([10, 20]))
        img = load_image(p)
        assert np.allclose(img.data * 255.0, [[10.0, 20.0]])

    @pytest.mark.parametrize("ext", ["pgm", "png"])
    def test_round_trip_is_byte_identical(self, tmp_path, ext):
        rng = np.random.default_rng(31)
        for i in range(10):
            raw = rng.integers(0, 256, size=(9, 13), dtype=np.uint8)
            p1 = tmp_path / f"a{i}.{ext}"
            p2 = tmp_path / f"b{i}.{ext}"
            if ext == "pgm":
                write_pgm(p1, 13, 9, raw.tobytes())
            else:
                PILImage.fromarray(raw, mode="L").save(p1)
            save_image(load_image(p1), p2)
            assert np.array_equal(load_image(p2).data, load_image(p1).data)

    def test_quantization_endpoints_and_half(self, tmp_path):
        p = tmp_path / "q.pgm"
        save_image(Image(np.array([[0.0, 1.0, 0.5]])), p)
        with open(p, "rb") as fh:
            payload = fh.read()[-3:]
        assert list(payload) == [0, 255, 128]

    def test_quantize_rounds_half_up(self):
        assert quantize_u8(np.array([127.5 / 255.0]))[0] == 128
        assert quantize_u8(np.array([127.49 / 255.0]))[0] == 127

    def test_png_rgb_uses_luma_weights(self, tmp_path):
        p = tmp_path / "rgb.png"
        rgb = np.zeros((1, 3, 3), dtype=np.uint8)
        rgb[0, 0] = [255, 0, 0]
        rgb[0, 1] = [0, 255, 0]
        rgb[0, 2] = [0, 0, 255]
        PILImage.fromarray(rgb, mode="RGB").save(p)
        img = load_image(p)
        assert np.allclose(img.data, [[0.299, 0.587, 0.114]])

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "bad.pgm"
        p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ImageFormatError):
            load_image(p)

    def test_rejects_low_maxval(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P5\n1 1\n100\n\x00")
        with pytest.raises(ImageFormatError):
            load_image(p)

    def test_rejects_truncated_raster(self, tmp_path):
        p = tmp_path / "t.pgm"
        p.write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(ImageFormatError):
            load_image(p)

    def test_rejects_missing_file(self, tmp_path):
        with pytest.raises(ImageFormatError):
            load_image(tmp_path / "nope.pgm")

    def test_rejects_unknown_extension(self, tmp_path):
        p = tmp_path / "x.tif"
        p.write_bytes(b"II*\x00")
        with pytest.raises(ImageFormatError):
            load_image(p)
        with pytest.raises(ImageFormatError):
            save_image(Image(np.zeros((1, 1))), p)

    def test_rejects_16bit_png(self, tmp_path):
        p = tmp_path / "deep.png"
        deep = PILImage.fromarray(np.zeros((2, 2), dtype=np.uint16))
        deep.save(p)
        with pytest.raises(ImageFormatError):
            load_image(p)


class TestGaussianBlur:
    def test_constant_image_unchanged(self):
        img = Image(np.full((16, 16), 0.37))
        for sigma in (0.5, 1.0, 2.5):
            out = gaussian_blur(img, sigma)
            assert np.allclose(out.data, 0.37, atol=1e-6)

    def test_impulse_center_weight(self):
        # oracle: evaluate the normalized 1D kernel directly
        sigma = 1.0
        radius = math.ceil(3 * sigma)
        taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2 * sigma**2))
        k0 = taps[radius] / taps.sum()
        data = np.zeros((21, 21))
        data[10, 10] = 1.0
        out = gaussian_blur(Image(data), sigma)
        assert abs(out.data[10, 10] - k0 * k0) < 1e-12

    def test_blur_composition_approximates_single_blur(self):
        # low-frequency bump, near-constant at borders so edge clamping
        # does not perturb the semigroup comparison
        ys, xs = np.mgrid[0:64, 0:64]
        r2 = (xs - 31.5) ** 2 + (ys - 31.5) ** 2
        img = Image(0.5 + 0.3 * np.exp(-r2 / (2 * 8.0**2)))
        twice = gaussian_blur(gaussian_blur(img, 1.0), 1.5)
        once = gaussian_blur(img, math.sqrt(1.0**2 + 1.5**2))
        assert np.max(np.abs(twice.data - once.data)) < 1e-3

    def test_preserves_mean_on_smooth_image(self):
        rng = np.random.default_rng(37)
        base = gaussian_blur(Image(rng.random((64, 64))), 3.0)
        for sigma in (0.8, 2.0):
            out = gaussian_blur(base, sigma)
            assert abs(out.data.mean() - base.data.mean()) < 1e-4

    def test_rejects_nonpositive_sigma(self):
        img = Image(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            gaussian_blur(img, 0.0)
        with pytest.raises(ValueError):
            gaussian_blur(img, -1.0)


class TestSampling:
    def test_bilinear_integer_coordinates_exact(self):
        rng = np.random.default_rng(41)
        img = Image(rng.random((6, 7)))
        for y in range(6):
            for x in range(7):
                assert sample_bilinear(img, x, y) == img.data[y, x]

    def test_bilinear_midpoint(self):
        img = Image(np.array([[0.0, 1.0]]))
        assert sample_bilinear(img, 0.5, 0.0) == pytest.approx(0.5)

    def test_bilinear_bounded_by_neighbors(self):
        rng = np.random.default_rng(43)
        a = rng.random((12, 12))
        xs = rng.uniform(-1.0, 12.0, size=1000)
        ys = rng.uniform(-1.0, 12.0, size=1000)
        vals = bilinear_at(a, xs, ys)
        for x, y, v in zip(xs, ys, vals):
            x0 = int(np.clip(np.floor(x), 0, 11))
            y0 = int(np.clip(np.floor(y), 0, 11))
            x1 = min(x0 + 1, 11)
            y1 = min(y0 + 1, 11)
            quad = [a[y0, x0], a[y0, x1], a[y1, x0], a[y1, x1]]
            assert min(quad) - 1e-12 <= v <= max(quad) + 1e-12

    def test_bilinear_clamps_outside(self):
        img = Image(np.array([[0.2, 0.8], [0.4, 0.6]]))
        assert sample_bilinear(img, -5.0, -5.0) == pytest.approx(0.2)
        assert sample_bilinear(img, 10.0, 10.0) == pytest.approx(0.6)

    def test_bicubic_integer_coordinates_exact(self):
        rng = np.random.default_rng(47)
        img = Image(rng.random((8, 8)))
        for y in range(2, 6):
            for x in range(2, 6):
                assert sample_bicubic(img, x, y) == pytest.approx(img.data[y, x], abs=1e-12)

    def test_bicubic_reproduces_linear_ramp(self):
        w = 16
        ramp = np.tile(np.arange(w) / (w - 1.0), (6, 1))
        img = Image(ramp)
        rng = np.random.default_rng(53)
        for _ in range(200):
            x = rng.uniform(1.5, w - 2.5)
            y = rng.uniform(1.5, 3.5)
            assert sample_bicubic(img, x, y) == pytest.approx(x / (w - 1.0), abs=1e-5)

    def test_bicubic_clamps_overshoot(self):
        step = np.tile(np.array([0.0] * 4 + [1.0] * 4), (8, 1))
        img = Image(step)
        rng = np.random.default_rng(59)
        for _ in range(300):
            v = sample_bicubic(img, rng.uniform(0, 7), rng.uniform(0, 7))
            assert 0.0 <= v <= 1.0


class TestUpscale:
    def test_factor_8_dimensions(self):
        img = Image(np.zeros((128, 128)))
        out = upscale(img, 8.0, InterpMethod.BILINEAR)
        assert out.shape == (1024, 1024)

    def test_constant_preserved_both_methods(self):
        img = Image(np.full((9, 9), 0.42))
        for method in InterpMethod:
            out = upscale(img, 3.0, method)
            assert np.allclose(out.data, 0.42, atol=1e-6)

    def test_factor_one_is_identity(self):
        rng = np.random.default_rng(61)
        img = Image(rng.random((10, 11)))
        for method in InterpMethod:
            out = upscale(img, 1.0, method)
            assert np.allclose(out.data, img.data, atol=1e-6)

    def test_bilinear_respects_input_range(self):
        rng = np.random.default_rng(67)
        img = Image(rng.uniform(0.2, 0.8, size=(7, 7)))
        out = upscale(img, 2.5, InterpMethod.BILINEAR)
        assert out.data.min() >= img.data.min() - 1e-12
        assert out.data.max() <= img.data.max() + 1e-12

    def test_outputs_stay_in_unit_interval(self):
        rng = np.random.default_rng(71)
        img = Image((rng.random((8, 8)) > 0.5).astype(np.float64))
        for method in InterpMethod:
            out = upscale(img, 3.7, method)
            assert out.data.min() >= 0.0
            assert out.data.max() <= 1.0

    def test_rejects_bad_factor(self):
        img = Image(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            upscale(img, 0.0, InterpMethod.BILINEAR)
        with pytest.raises(ValueError):
            upscale(img, 0.05, InterpMethod.BILINEAR)

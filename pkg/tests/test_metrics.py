import math

import numpy as np
import pytest

from lunareg.imgcore import Image
from lunareg.metrics import (
    RetrievalRanking,
    Scale,
    SsimMode,
    SsimParams,
    average_precision,
    mean_average_precision,
    mse,
    psnr,
    ssim,
)

WINDOWED_8BIT = SsimParams(L=255.0, mode=SsimMode.WINDOWED)


def naive_windowed_ssim(xv, yv, c1, c2):
    """Reference: explicit loop over full 11x11 Gaussian windows."""
    idx = np.arange(11) - 5
    g = np.exp(-(idx**2) / (2 * 1.5**2))
    w = np.outer(g, g)
    w /= w.sum()
    vals = []
    for r in range(xv.shape[0] - 10):
        for c in range(xv.shape[1] - 10):
            px = xv[r : r + 11, c : c + 11]
            py = yv[r : r + 11, c : c + 11]
            mx = (w * px).sum()
            my = (w * py).sum()
            vx = (w * (px - mx) ** 2).sum()
            vy = (w * (py - my) ** 2).sum()
            cov = (w * (px - mx) * (py - my)).sum()
            num = (2 * mx * my + c1) * (2 * cov + c2)
            den = (mx * mx + my * my + c1) * (vx + vy + c2)
            vals.append(num / den)
    return float(np.mean(vals))


class TestMse:
    def test_identical_images_zero(self):
        rng = np.random.default_rng(3)
        img = Image(rng.random((5, 5)))
        assert mse(img, img, Scale.UNIT) == 0.0
        assert mse(img, img, Scale.EIGHTBIT) == 0.0

    def test_full_contrast_eightbit(self):
        a = Image(np.ones((4, 4)))
        b = Image(np.zeros((4, 4)))
        assert mse(a, b, Scale.EIGHTBIT) == 65025.0

    def test_half_contrast_pair(self):
        a = Image(np.array([[0.0, 1.0]]))
        b = Image(np.array([[0.0, 0.0]]))
        assert mse(a, b, Scale.EIGHTBIT) == 32512.5

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        a = Image(rng.random((6, 6)))
        b = Image(rng.random((6, 6)))
        assert mse(a, b, Scale.UNIT) == mse(b, a, Scale.UNIT)

    def test_scales_agree_on_lattice_values(self):
        # images already on the 8-bit lattice quantize exactly
        rng = np.random.default_rng(7)
        a = Image(rng.integers(0, 256, (8, 8)) / 255.0)
        b = Image(rng.integers(0, 256, (8, 8)) / 255.0)
        assert mse(a, b, Scale.UNIT) * 65025.0 == pytest.approx(
            mse(a, b, Scale.EIGHTBIT), rel=1e-12
        )

    def test_scales_agree_within_quantization(self):
        rng = np.random.default_rng(9)
        a = Image(rng.random((16, 16)))
        b = Image(rng.random((16, 16)))
        rms_unit = math.sqrt(mse(a, b, Scale.UNIT)) * 255.0
        rms_8bit = math.sqrt(mse(a, b, Scale.EIGHTBIT))
        assert abs(rms_unit - rms_8bit) <= 1.0

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mse(Image(np.zeros((2, 2))), Image(np.zeros((2, 3))))


class TestPsnr:
    def test_identical_images_infinite(self):
        img = Image(np.full((3, 3), 0.5))
        assert psnr(img, img, Scale.EIGHTBIT) == math.inf

    def test_full_contrast_zero_db(self):
        a = Image(np.ones((4, 4)))
        b = Image(np.zeros((4, 4)))
        assert psnr(a, b, Scale.EIGHTBIT) == 0.0

    def test_unit_mse_value(self):
        # oracle: 10*log10(255^2) for a one-step difference everywhere
        a = Image(np.zeros((4, 4)))
        b = Image(np.full((4, 4), 1.0 / 255.0))
        assert mse(a, b, Scale.EIGHTBIT) == 1.0
        assert psnr(a, b, Scale.EIGHTBIT) == pytest.approx(10 * math.log10(65025), abs=1e-9)
        assert psnr(a, b, Scale.EIGHTBIT) == pytest.approx(48.1308, abs=1e-3)

    def test_symmetric(self):
        rng = np.random.default_rng(11)
        a = Image(rng.random((5, 5)))
        b = Image(rng.random((5, 5)))
        assert psnr(a, b, Scale.UNIT) == psnr(b, a, Scale.UNIT)


class TestSsim:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(13)
        img = Image(rng.random((16, 16)))
        assert ssim(img, img, SsimParams()) == pytest.approx(1.0, abs=1e-9)
        assert ssim(img, img, WINDOWED_8BIT) == 1.0

    def test_global_constant_images(self):
        one = Image(np.ones((8, 8)))
        zero = Image(np.zeros((8, 8)))
        expected = 1e-4 / (1.0 + 1e-4)
        assert ssim(one, zero, SsimParams()) == pytest.approx(expected, abs=1e-8)
        assert ssim(one, zero, SsimParams()) == pytest.approx(9.999e-5, abs=1e-8)

    def test_symmetric(self):
        rng = np.random.default_rng(17)
        a = Image(rng.random((20, 20)))
        b = Image(rng.random((20, 20)))
        for params in (SsimParams(), WINDOWED_8BIT):
            assert ssim(a, b, params) == pytest.approx(ssim(b, a, params), abs=1e-12)

    def test_windowed_matches_naive_loop(self):
        rng = np.random.default_rng(19)
        a = Image(rng.random((14, 17)))
        b = Image(np.clip(a.data + rng.normal(0, 0.05, a.shape), 0, 1))
        params = WINDOWED_8BIT
        av = np.floor(a.data * 255.0 + 0.5)
        bv = np.floor(b.data * 255.0 + 0.5)
        expected = naive_windowed_ssim(av, bv, params.c1, params.c2)
        assert ssim(a, b, params) == pytest.approx(expected, abs=1e-9)

    def test_windowed_unit_scale_matches_naive_loop(self):
        rng = np.random.default_rng(23)
        a = Image(rng.random((12, 12)))
        b = Image(rng.random((12, 12)))
        params = SsimParams(mode=SsimMode.WINDOWED)
        expected = naive_windowed_ssim(a.data, b.data, params.c1, params.c2)
        assert ssim(a, b, params) == pytest.approx(expected, abs=1e-9)

    def test_windowed_rejects_small_images(self):
        img = Image(np.zeros((10, 16)))
        with pytest.raises(ValueError):
            ssim(img, img, SsimParams(mode=SsimMode.WINDOWED))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ssim(Image(np.zeros((12, 12))), Image(np.zeros((12, 13))))

    def test_range(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            a = Image(rng.random((16, 16)))
            b = Image(rng.random((16, 16)))
            for params in (SsimParams(), WINDOWED_8BIT):
                v = ssim(a, b, params)
                assert -1.0 <= v <= 1.0


class TestSsimParams:
    def test_constants_derive_from_fields(self):
        p = SsimParams(L=255.0)
        assert p.c1 == pytest.approx((0.01 * 255) ** 2)
        assert p.c2 == pytest.approx((0.03 * 255) ** 2)

    def test_rejects_nonpositive(self):
        for kwargs in ({"k1": 0.0}, {"k2": -1.0}, {"L": 0.0}):
            with pytest.raises(ValueError):
                SsimParams(**kwargs)


class TestAveragePrecision:
    def test_all_relevant(self):
        r = RetrievalRanking((1, 1, 1), 3)
        assert average_precision(r) == 1.0

    def test_mixed_ranking(self):
        r = RetrievalRanking((1, 0, 1), 2)
        assert average_precision(r) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)
        assert average_precision(r) == pytest.approx(0.83333, abs=1e-5)

    def test_nothing_retrieved(self):
        assert average_precision(RetrievalRanking((0, 0, 0), 2)) == 0.0

    def test_rejects_zero_total(self):
        with pytest.raises(ValueError):
            average_precision(RetrievalRanking((0, 0), 0))

    def test_ranking_validation(self):
        with pytest.raises(ValueError):
            RetrievalRanking((1, 2), 3)
        with pytest.raises(ValueError):
            RetrievalRanking((1, 1, 1), 2)

    def test_stays_in_unit_interval(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            flags = tuple(rng.integers(0, 2, size=rng.integers(1, 20)))
            total = sum(flags) + int(rng.integers(0, 4))
            if total == 0:
                continue
            ap = average_precision(RetrievalRanking(flags, total))
            assert 0.0 <= ap <= 1.0


class TestMeanAveragePrecision:
    def test_single_value(self):
        assert mean_average_precision([1.0]) == 1.0

    def test_pair(self):
        assert mean_average_precision([1.0, 0.0]) == 0.5

    def test_fractional_pair(self):
        assert mean_average_precision([0.83333, 1.0]) == pytest.approx(0.91667, abs=1e-5)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            mean_average_precision([])

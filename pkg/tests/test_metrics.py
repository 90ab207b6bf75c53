"""Metric closed forms, independent oracles, and symmetry properties."""

import math

import numpy as np
import pytest

from inrdenoise.imaging import Image, Prng
from inrdenoise.metrics import (error_map, fmt_metric, mad_sigma, paired_t_test,
                                psnr, snr, ssim, _gaussian_window)


def gray(values) -> Image:
    return Image(np.asarray(values, dtype=np.float64))


class TestPsnr:
    def test_identical_is_infinite(self, composite_96):
        assert psnr(composite_96, composite_96) == math.inf

    def test_uniform_half_gap_closed_form(self):
        a = gray(np.zeros((16, 16)))
        b = gray(np.full((16, 16), 0.5))
        assert abs(psnr(a, b) - 10 * math.log10(1 / 0.25)) < 1e-12
        assert abs(psnr(a, b) - 6.0206) < 1e-3

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a = gray(rng.uniform(0, 1, (12, 12)))
        b = gray(rng.uniform(0, 1, (12, 12)))
        assert psnr(a, b) == psnr(b, a)

    def test_monotone_in_gap(self):
        base = gray(np.full((8, 8), 0.2))
        vals = [psnr(base, gray(np.full((8, 8), 0.2 + d))) for d in (0.1, 0.2, 0.4)]
        assert vals[0] > vals[1] > vals[2]

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dims differ"):
            psnr(gray(np.zeros((4, 4))), gray(np.zeros((4, 5))))


class TestSsim:
    def test_identical_is_one(self, composite_96):
        assert ssim(composite_96, composite_96) == 1.0

    def test_constant_images_closed_form(self):
        a = gray(np.zeros((16, 16)))
        b = gray(np.ones((16, 16)))
        c1 = 0.01 ** 2
        assert abs(ssim(a, b) - c1 / (1 + c1)) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = gray(rng.uniform(0, 1, (14, 18)))
        b = gray(rng.uniform(0, 1, (14, 18)))
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_window_too_small(self):
        with pytest.raises(ValueError, match="min dim"):
            ssim(gray(np.zeros((8, 20))), gray(np.zeros((8, 20))))

    def test_against_window_loop_oracle(self):
        # direct per-window weighted-moment evaluation, valid positions only
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, (13, 15))
        y = np.clip(x + rng.normal(0, 0.1, (13, 15)), 0, 1)
        k1d = _gaussian_window(11, 1.5)
        w = np.outer(k1d, k1d)
        c1, c2 = 0.01 ** 2, 0.03 ** 2
        vals = []
        for r in range(13 - 10):
            for c in range(15 - 10):
                px = x[r:r + 11, c:c + 11]
                py = y[r:r + 11, c:c + 11]
                mx, my = (w * px).sum(), (w * py).sum()
                vx = (w * px * px).sum() - mx ** 2
                vy = (w * py * py).sum() - my ** 2
                cxy = (w * px * py).sum() - mx * my
                vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) /
                            ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
        expected = float(np.mean(vals))
        assert abs(ssim(gray(x), gray(y)) - expected) < 1e-12

    def test_channel_average(self):
        rng = np.random.default_rng(3)
        planes = rng.uniform(0, 1, (12, 12, 3))
        noisy = np.clip(planes + rng.normal(0, 0.05, planes.shape), 0, 1)
        per_channel = [ssim(gray(planes[:, :, c]), gray(noisy[:, :, c]))
                       for c in range(3)]
        combined = ssim(Image(planes), Image(noisy))
        assert abs(combined - np.mean(per_channel)) < 1e-12


class TestSnr:
    def test_ones_over_half_ones(self):
        assert snr(np.ones(4), 0.5 * np.ones(4)) == 2.0

    def test_zero_error_is_infinite(self):
        assert snr(np.ones(4), np.zeros(4)) == math.inf

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError, match="all-zero"):
            snr(np.zeros(4), np.ones(4))

    def test_scale_covariance(self):
        rng = np.random.default_rng(4)
        s, e = rng.normal(size=16), rng.normal(size=16)
        for c in (0.5, 2.0, 117.0):
            assert abs(snr(c * s, c * e) - snr(s, e)) < 1e-12

    def test_best_case_substitution_doubles_snr(self):
        # halving the error norm exactly doubles the ratio
        rng = np.random.default_rng(5)
        x, n = rng.normal(size=64), rng.normal(size=64)
        assert abs(snr(x, n / 2) - 2 * snr(x, n)) < 1e-12


class TestErrorMap:
    def test_zero_for_identical(self, composite_96):
        np.testing.assert_array_equal(error_map(composite_96, composite_96),
                                      np.zeros(composite_96.data.shape))

    def test_constant_offset(self):
        a = gray(np.full((8, 8), 0.6))
        b = gray(np.full((8, 8), 0.5))
        np.testing.assert_allclose(error_map(a, b), np.full((8, 8, 1), 0.1),
                                   atol=1e-15)

    def test_signed_and_unclamped(self):
        a = gray(np.zeros((4, 4)))
        b = gray(np.ones((4, 4)))
        assert error_map(a, b).min() == -1.0

    def test_norm_consistency_with_snr(self, composite_96):
        rng = np.random.default_rng(6)
        x_hat = Image(np.clip(composite_96.data + rng.normal(0, 0.05,
                              composite_96.data.shape), 0, 1))
        e = error_map(x_hat, composite_96)
        direct = float(np.linalg.norm(composite_96.data.reshape(-1)) /
                       np.linalg.norm(e.reshape(-1)))
        assert abs(snr(composite_96.data.reshape(-1), e.reshape(-1)) - direct) < 1e-12


class TestMadSigma:
    def test_constant_field_is_zero(self):
        assert mad_sigma(np.full((32, 32), 0.37)) == 0.0

    def test_iid_gaussian_within_5pct(self):
        field = Prng(77).normals(256 * 256).reshape(256, 256) * (25.0 / 255.0)
        est = mad_sigma(field)
        sample = float(field.std()) * 255.0
        assert abs(est - 25.0) / 25.0 < 0.05
        assert abs(est - sample) / sample < 0.05

    def test_dc_shift_invariance(self):
        rng = np.random.default_rng(8)
        f = rng.normal(0, 0.1, (64, 64))
        assert abs(mad_sigma(f) - mad_sigma(f + 0.25)) < 1e-9

    def test_odd_trailing_row_col_dropped(self):
        rng = np.random.default_rng(9)
        f = rng.normal(0, 0.1, (65, 65))
        assert mad_sigma(f) == mad_sigma(f[:64, :64])

    def test_color_is_channel_average(self):
        rng = np.random.default_rng(10)
        f = rng.normal(0, 0.1, (32, 32, 3))
        per = [mad_sigma(f[:, :, c]) for c in range(3)]
        assert abs(mad_sigma(f) - np.mean(per)) < 1e-12

    def test_degenerate_size_rejected(self):
        with pytest.raises(ValueError, match="at least 2x2"):
            mad_sigma(np.zeros((1, 8)))


class TestPairedTTest:
    def test_equal_vectors(self):
        t, p = paired_t_test(np.arange(5.0), np.arange(5.0))
        assert t == 0.0 and p == 1.0

    def test_constant_nonzero_difference(self):
        t, p = paired_t_test(np.arange(5.0) + 1.0, np.arange(5.0))
        assert t == math.inf and p == 0.0

    def test_against_quadrature_oracle(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([0.0, 0.0, 1.0, 2.0])
        d = a - b
        n = len(d)
        t_expect = d.mean() / (d.std(ddof=1) / math.sqrt(n))
        t, p = paired_t_test(a, b)
        assert abs(t - t_expect) < 1e-12
        # two-sided p via Simpson integration of the t density, nu = 3
        nu = n - 1
        const = math.gamma((nu + 1) / 2) / (math.sqrt(nu * math.pi) *
                                            math.gamma(nu / 2))

        def density(x):
            return const * (1 + x * x / nu) ** (-(nu + 1) / 2)

        hi = 400.0
        xs = np.linspace(abs(t), hi, 200_001)
        ys = np.array([density(x) for x in xs])
        tail = float(np.trapezoid(ys, xs))
        assert abs(p - 2 * tail) < 1e-6

    def test_sign_swap_negates_t_preserves_p(self):
        rng = np.random.default_rng(11)
        a, b = rng.normal(size=10), rng.normal(size=10)
        t1, p1 = paired_t_test(a, b)
        t2, p2 = paired_t_test(b, a)
        assert abs(t1 + t2) < 1e-12
        assert abs(p1 - p2) < 1e-12

    def test_needs_two_pairs(self):
        with pytest.raises(ValueError, match="n >= 2"):
            paired_t_test(np.array([1.0]), np.array([2.0]))


class TestFormatting:
    def test_inf_sentinel(self):
        assert fmt_metric(math.inf) == "inf"

    def test_missing_is_empty(self):
        assert fmt_metric(None) == ""

    def test_plain_value(self):
        assert fmt_metric(1.25) == "1.250000"

import math

import numpy as np
import pytest

from wavecopy.errors import DimMismatchError, EmptyError, TooSmallError, ZeroFieldError
from wavecopy.metrics import (
    LatencyBudget,
    field_fidelity,
    latency_budget,
    psnr,
    ssim,
    summarize,
)


def rand_image(rng, h=64, w=64):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


class TestPsnr:
    def test_identical_is_infinite(self):
        img = rand_image(np.random.default_rng(0))
        assert psnr(img, img) == math.inf

    def test_unit_offset(self):
        # MSE = 1 everywhere -> 20*log10(255)
        a = np.full((32, 32, 3), 100, dtype=np.uint8)
        b = a + 1
        assert psnr(a, b) == pytest.approx(20.0 * math.log10(255.0), abs=1e-9)

    def test_full_scale_difference_is_zero_db(self):
        a = np.zeros((16, 16, 3), dtype=np.uint8)
        b = np.full((16, 16, 3), 255, dtype=np.uint8)
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rand_image(rng), rand_image(rng)
        assert psnr(a, b) == psnr(b, a)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            psnr(np.zeros((4, 4, 3), np.uint8), np.zeros((4, 5, 3), np.uint8))


class TestSsim:
    def test_identical_is_one(self):
        img = rand_image(np.random.default_rng(2))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_high_variance_negative(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 2, size=(64, 64, 3), dtype=np.uint8) * 255
        b = 255 - a
        assert ssim(a, b) < 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        a, b = rand_image(rng), rand_image(rng)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_matches_reference_implementation(self):
        skimage_metrics = pytest.importorskip("skimage.metrics")
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b = rand_image(rng), rand_image(rng)
            ref = skimage_metrics.structural_similarity(
                a,
                b,
                channel_axis=2,
                gaussian_weights=True,
                sigma=1.5,
                use_sample_covariance=False,
                data_range=255,
            )
            assert ssim(a, b) == pytest.approx(ref, abs=1e-6)

    def test_too_small(self):
        with pytest.raises(TooSmallError):
            ssim(np.zeros((8, 8, 3), np.uint8), np.zeros((8, 8, 3), np.uint8))


class TestFieldFidelity:
    def test_equal_vectors(self):
        f = np.array([1 + 2j, 3 - 1j, 0.5j])
        assert field_fidelity(f, f) == pytest.approx(1.0, abs=1e-12)

    def test_global_phase_and_scale_invariance(self):
        rng = np.random.default_rng(6)
        f = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        g = f * 3.7 * np.exp(1j * 1.234)
        assert field_fidelity(f, g) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert field_fidelity([1, 0], [0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_bounded_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            f = rng.standard_normal(20) + 1j * rng.standard_normal(20)
            g = rng.standard_normal(20) + 1j * rng.standard_normal(20)
            assert 0.0 <= field_fidelity(f, g) <= 1.0 + 1e-12

    def test_zero_field(self):
        with pytest.raises(ZeroFieldError):
            field_fidelity(np.zeros(3, complex), np.ones(3, complex))


class TestLatencyBudget:
    def test_paper_defaults(self):
        out = latency_budget(LatencyBudget())
        assert out["min_total_ms"] == 8.0
        assert out["max_total_ms"] == 39.0
        assert out["feasible_best_case"] and not out["guaranteed"]

    def test_with_network(self):
        out = latency_budget(LatencyBudget(network=(1.0, 20.0)))
        assert out["min_total_ms"] == 9.0
        assert out["max_total_ms"] == 59.0

    def test_zero_budget(self):
        budget = LatencyBudget((0, 0), (0, 0), (0, 0), (0, 0))
        out = latency_budget(budget)
        assert out["min_total_ms"] == 0 and out["max_total_ms"] == 0
        assert out["feasible_best_case"] and out["guaranteed"]


class TestSummarize:
    def test_small_list(self):
        s = summarize([1, 2, 3, 4, 5])
        assert s["median"] == 3 and s["q1"] == 2 and s["q3"] == 4
        assert s["min"] == 1 and s["max"] == 5

    def test_single_value(self):
        s = summarize([7.5])
        assert all(s[k] == 7.5 for k in ("min", "q1", "median", "q3", "max"))

    def test_matches_numpy_quantiles(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            vals = rng.standard_normal(rng.integers(1, 40))
            s = summarize(vals)
            for key, q in (("q1", 25), ("median", 50), ("q3", 75)):
                assert s[key] == pytest.approx(np.percentile(vals, q), abs=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(9)
        vals = list(rng.standard_normal(31))
        a = summarize(vals)
        rng.shuffle(vals)
        assert summarize(vals) == a

    def test_inf_excluded_and_counted(self):
        s = summarize([1.0, math.inf, 2.0, 3.0])
        assert s["non_finite"] == 1 and s["max"] == 3.0 and s["count"] == 3

    def test_empty(self):
        with pytest.raises(EmptyError):
            summarize([])

"""
Unit tests for geometric probing: frames, scales, Sobol centres and slices.
"""

import math

import numpy as np
import pytest

from src.domain.probing.geometry import (SCALE_MAX, SCALE_MIN, SliceParams, orthonormalize,
                                         random_orthonormal, sample_orientation, sample_scale)
from src.domain.probing.slicer import (NEUTRAL_VALUE, Provenance, Slice, SliceSet, build_probe_set,
                                       grid_coordinates, normalize_slice, rasterize_slice, slice_points)
from src.domain.probing.sobol import sample_centres
from src.domain.suite.bbob import make_instance
from src.utils.exceptions import ConfigurationError
from src.utils.seeding import make_rng


class TestGeometry:
    def setup_method(self):
        """每个测试使用固定种子的生成器。"""
        self.rng = make_rng(123)

    def test_orientation_orthonormal(self):
        """测试大量抽样的方向矩阵满足 OᵀO = I₂。"""
        worst = 0.0
        for d in (2, 3, 10):
            for _ in range(2000):
                o = sample_orientation(d, self.rng)
                worst = max(worst, float(np.max(np.abs(o.T @ o - np.eye(2)))))
        assert worst < 1e-10

    def test_projection_mean_matches_haar(self):
        """测试 d=3 时 10⁵ 个方向矩阵都正交，且 O₁₁² 的均值接近 1/3。"""
        frames = np.array([sample_orientation(3, self.rng) for _ in range(100000)])
        gram = np.einsum("nki,nkj->nij", frames, frames)
        assert np.max(np.abs(gram - np.eye(2))) < 1e-10
        assert 0.3133 <= np.mean(frames[:, 0, 0] ** 2) <= 0.3533

    def test_full_rank_frame(self):
        """测试满秩标架是正交矩阵。"""
        q = random_orthonormal(6, 6, self.rng)
        assert np.max(np.abs(q.T @ q - np.eye(6))) < 1e-10

    def test_degenerate_columns_rejected(self):
        """测试线性相关的列被拒绝。"""
        with pytest.raises(ValueError):
            orthonormalize(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))

    def test_log_uniform_scale(self):
        """测试 10⁵ 个对数均匀尺度的范围、log ℓ 的均值与几何中点处的中位数。"""
        draws = np.array([sample_scale(self.rng) for _ in range(100000)])
        assert draws.min() >= SCALE_MIN and draws.max() <= SCALE_MAX
        expected = 0.5 * (math.log(SCALE_MIN) + math.log(SCALE_MAX))
        assert abs(np.mean(np.log(draws)) - expected) < 0.02
        assert abs(np.mean(draws <= math.sqrt(SCALE_MIN * SCALE_MAX)) - 0.5) <= 0.01

    def test_uniform_scale_variant(self):
        """测试均匀尺度变体的均值。"""
        draws = np.array([sample_scale(self.rng, distribution="uniform") for _ in range(20000)])
        assert abs(draws.mean() - 0.5 * (SCALE_MIN + SCALE_MAX)) < 0.01

    def test_unknown_scale_distribution(self):
        """测试未知尺度分布抛出配置错误。"""
        with pytest.raises(ConfigurationError):
            sample_scale(self.rng, distribution="gamma")


class TestSobol:
    def test_elementary_interval_stratification(self):
        """测试前 2^m 个点在每个坐标上各占一个二进区间。"""
        points = np.array(sample_centres(32, 5, seed=9))
        assert points.shape == (32, 5)
        for j in range(5):
            cells = np.floor(points[:, j] * 32).astype(int)
            assert sorted(cells) == list(range(32))

    def test_non_power_of_two_prefix(self):
        """测试非 2 的幂时取前 count 个点。"""
        assert np.array_equal(np.array(sample_centres(5, 3, seed=1)), np.array(sample_centres(8, 3, seed=1))[:5])

    def test_deterministic(self):
        """测试相同种子得到相同中心。"""
        assert np.array_equal(np.array(sample_centres(16, 4, 3)), np.array(sample_centres(16, 4, 3)))
        assert not np.array_equal(np.array(sample_centres(16, 4, 3)), np.array(sample_centres(16, 4, 4)))

    @pytest.mark.parametrize("count,dim", [(0, 2), (4, 0), (4, 100000)])
    def test_invalid_arguments(self, count, dim):
        """测试非法参数抛出配置错误。"""
        with pytest.raises(ConfigurationError):
            sample_centres(count, dim, 0)


class TestSlices:
    def setup_method(self):
        """准备一个二维 Rastrigin 实例。"""
        self.instance = make_instance(3, 2, 1)

    def test_grid_endpoints(self):
        """测试端点网格从 -1/2 到 1/2。"""
        u = grid_coordinates(5)
        assert np.array_equal(u, [-0.5, -0.25, 0.0, 0.25, 0.5])

    @pytest.mark.parametrize("r", [4, 8])
    def test_mask_matches_direct_containment(self, r):
        """测试两种分辨率各 5000 张、共 10⁴ 张切片上掩码与逐点包含判断逐位一致。"""
        rng = make_rng(5, r)
        instances = {d: make_instance(1, d, 1) for d in range(2, 6)}
        for _ in range(5000):
            d = int(rng.integers(2, 6))
            params = SliceParams(centre=rng.uniform(0, 1, d), orientation=sample_orientation(d, rng),
                                 scale=sample_scale(rng))
            _, mask = rasterize_slice(instances[d], params, r)
            points = slice_points(params, r)
            for a in range(r):
                for b in range(r):
                    inside = all(0.0 <= points[a, b, c] <= 1.0 for c in range(d))
                    assert mask[a, b] == int(inside)

    def test_invalid_entries_are_neutral(self):
        """测试无效格点的归一化值恰为 0.5。"""
        params = SliceParams(centre=np.array([0.0, 0.0]), orientation=np.eye(2), scale=0.5)
        raw, mask = rasterize_slice(self.instance, params, 8)
        values, _, _ = normalize_slice(raw, mask)
        assert (mask == 0).any()
        assert np.all(values[mask == 0] == NEUTRAL_VALUE)
        assert values[mask == 1].min() == 0.0 and values[mask == 1].max() == 1.0

    def test_normalization_affine_invariance(self):
        """测试正仿射变换不改变 X，负缩放使 X 翻转为 1 - X。"""
        rng = make_rng(8)
        raw = rng.normal(size=(8, 8))
        mask = (rng.random((8, 8)) > 0.3).astype(np.uint8)
        x, _, _ = normalize_slice(raw, mask)
        scaled, _, _ = normalize_slice(4.0 * raw, mask)
        assert np.array_equal(scaled, x)
        shifted, _, _ = normalize_slice(3.0 * raw + 7.0, mask)
        assert np.allclose(shifted, x, rtol=0, atol=1e-12)
        flipped, _, _ = normalize_slice(-raw, mask)
        assert np.allclose(flipped[mask == 1], 1.0 - x[mask == 1], rtol=0, atol=1e-12)

    def test_side_statistics(self):
        """测试 Δ 与线性插值 IQR。"""
        values, value_range, spread = normalize_slice(np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((2, 2)))
        assert value_range == 3.0
        assert spread == 1.5
        assert np.allclose(values, [[0.0, 1 / 3], [2 / 3, 1.0]])

    def test_zero_range_slice(self):
        """测试常数切片的有效格点也为 0.5。"""
        values, value_range, spread = normalize_slice(np.full((4, 4), 2.0), np.ones((4, 4)))
        assert np.all(values == NEUTRAL_VALUE)
        assert value_range == 0.0 and spread == 0.0

    def test_all_invalid_slice(self):
        """测试全无效切片。"""
        values, value_range, _ = normalize_slice(np.arange(16.0).reshape(4, 4), np.zeros((4, 4)))
        assert np.all(values == NEUTRAL_VALUE)
        assert value_range == 0.0

    @pytest.mark.parametrize("k", [1, 8, 32])
    @pytest.mark.parametrize("r", [4, 8])
    def test_budget_accounting(self, k, r):
        """测试评估次数恰为 k·r²。"""
        slice_set = build_probe_set(self.instance, k, r, seed=11)
        assert slice_set.evaluations == k * r * r
        assert slice_set.k == k and slice_set.resolution == r

    def test_probe_set_deterministic(self):
        """测试相同种子得到逐位相同的 SliceSet。"""
        a = build_probe_set(self.instance, 4, 8, seed=3, provenance=Provenance(3, 2, 1, 0))
        b = build_probe_set(self.instance, 4, 8, seed=3, provenance=Provenance(3, 2, 1, 0))
        for sa, sb in zip(a.slices, b.slices):
            assert np.array_equal(sa.values, sb.values)
            assert np.array_equal(sa.mask, sb.mask)
            assert (sa.scale, sa.value_range, sa.iqr) == (sb.scale, sb.value_range, sb.iqr)
        assert a.provenance.as_tuple() == (3, 2, 1, 0)

    def test_slice_set_validation(self):
        """测试空切片集或分辨率不一致时报错。"""
        with pytest.raises(ConfigurationError):
            SliceSet(slices=[], dimension=2)
        s4 = Slice(values=np.zeros((4, 4)), mask=np.ones((4, 4), np.uint8), scale=0.1, value_range=1.0, iqr=0.5)
        s8 = Slice(values=np.zeros((8, 8)), mask=np.ones((8, 8), np.uint8), scale=0.1, value_range=1.0, iqr=0.5)
        with pytest.raises(ConfigurationError):
            SliceSet(slices=[s4, s8], dimension=2)

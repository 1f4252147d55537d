"""
Unit tests for the BBOB-style function suite.
"""

import numpy as np
import pytest

from src.domain.suite.bbob import (FUNCTIONS, Bounds, ProblemInstance, evaluate, evaluate_batch,
                                   function_group, make_instance, optimum_location, to_physical)
from src.utils.exceptions import ConfigurationError, InputError

# 最优点就在 shift 处的函数
SHIFT_OPTIMA = [1, 2, 3, 4, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 21, 22, 23]


class TestMakeInstance:
    def test_deterministic(self):
        """测试相同 (f, d, i) 得到逐位相同的实例。"""
        a = make_instance(1, 2, 1)
        b = make_instance(1, 2, 1)
        assert np.array_equal(a.shift, b.shift)
        assert np.array_equal(a.rotation, b.rotation)
        assert a.f_opt == b.f_opt

    def test_instances_differ(self):
        """测试不同实例编号得到不同的平移。"""
        assert not np.array_equal(make_instance(1, 2, 1).shift, make_instance(1, 2, 2).shift)

    @pytest.mark.parametrize("args", [(25, 2, 1), (0, 2, 1), (1, 1, 1), (1, 2, 0)])
    def test_out_of_range(self, args):
        """测试越界参数抛出配置错误。"""
        with pytest.raises(ConfigurationError):
            make_instance(*args)

    @pytest.mark.parametrize("fid", range(1, 25))
    def test_rotation_orthogonal_and_shift_inside(self, fid):
        """测试旋转矩阵正交且平移严格位于边界内。"""
        inst = make_instance(fid, 5, 3)
        for m in (inst.rotation, inst.rotation_q):
            assert np.max(np.abs(m.T @ m - np.eye(5))) < 1e-10
        assert np.all(np.abs(inst.shift) < 5.0)
        assert -100.0 <= inst.f_opt <= 100.0

    @pytest.mark.parametrize("fid", [1, 2, 3, 4, 5])
    def test_separable_functions_are_not_rotated(self, fid):
        """测试 f1–f5 的旋转为单位阵。"""
        inst = make_instance(fid, 4, 2)
        assert np.array_equal(inst.rotation, np.eye(4))

    def test_function_groups(self):
        """测试标准函数分组。"""
        assert function_group(1) == "f1-f5"
        assert function_group(9) == "f6-f9"
        assert function_group(14) == "f10-f14"
        assert function_group(15) == "f15-f19"
        assert function_group(24) == "f20-f24"
        with pytest.raises(ConfigurationError):
            function_group(25)


class TestEvaluate:
    def setup_method(self):
        """构造一个平移为 0、f_opt 为 0 的球函数实例。"""
        self.sphere = ProblemInstance(function_id=1, dimension=2, instance_id=1, shift=np.zeros(2),
                                      rotation=np.eye(2), rotation_q=np.eye(2), f_opt=0.0,
                                      bounds=Bounds.box(2))

    def test_sphere_unit_vector(self):
        """测试 ‖x‖² 在单位向量处为 1。"""
        assert evaluate(self.sphere, [1.0, 0.0]) == 1.0

    def test_sphere_optimum_exact(self):
        """测试球函数在 shift 处精确等于 f_opt。"""
        inst = make_instance(1, 3, 4)
        assert evaluate(inst, inst.shift) == inst.f_opt

    @pytest.mark.parametrize("fid", SHIFT_OPTIMA)
    def test_value_at_optimum(self, fid):
        """测试各函数在已知最优点处等于 f_opt。"""
        inst = make_instance(fid, 3, 1)
        assert abs(evaluate(inst, optimum_location(inst)) - inst.f_opt) < 1e-8

    def test_linear_slope_optimum_on_boundary(self):
        """测试线性斜坡的最优点在边界角上。"""
        inst = make_instance(5, 4, 2)
        x_opt = optimum_location(inst)
        assert np.all(np.abs(x_opt) == 5.0)
        assert abs(evaluate(inst, x_opt) - inst.f_opt) < 1e-8

    @pytest.mark.parametrize("fid", range(1, 25))
    def test_finite_and_batched(self, fid):
        """测试批量求值有限且与逐点求值一致。"""
        inst = make_instance(fid, 2, 1)
        pts = np.random.default_rng(fid).uniform(-6, 6, size=(7, 2))
        batch = evaluate_batch(inst, pts)
        assert batch.shape == (7,)
        assert np.all(np.isfinite(batch))
        assert np.allclose(batch, [evaluate(inst, p) for p in pts], rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        """测试维度不匹配抛出输入错误。"""
        with pytest.raises(InputError):
            evaluate(self.sphere, [1.0, 2.0, 3.0])
        with pytest.raises(InputError):
            evaluate_batch(self.sphere, np.zeros((4, 3)))

    def test_all_functions_registered(self):
        """测试 24 个函数全部注册。"""
        assert sorted(FUNCTIONS) == list(range(1, 25))


class TestToPhysical:
    def test_affine_map(self):
        """测试单位立方体到 [-5, 5]^d 的仿射映射。"""
        bounds = Bounds.box(3)
        assert np.array_equal(to_physical(np.full(3, 0.5), bounds), np.zeros(3))
        assert np.array_equal(to_physical(np.zeros(3), bounds), np.full(3, -5.0))
        assert to_physical(np.array([0.75, 0.5, 0.5]), bounds)[0] == 2.5

    def test_batched(self):
        """测试 (n, d) 输入逐行映射。"""
        out = to_physical(np.array([[0.0, 1.0], [0.5, 0.25]]), Bounds.box(2))
        assert np.array_equal(out, [[-5.0, 5.0], [0.0, -2.5]])

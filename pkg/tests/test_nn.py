"""
Unit tests for the differentiable primitives, losses and the Adam optimizer.
Every backward pass is checked against central finite differences.
"""

import numpy as np
import pytest

from src.domain.nn import primitives as P
from src.domain.nn.gradcheck import max_relative_error, numerical_gradient
from src.domain.nn.losses import bce_with_logits, smooth_l1
from src.domain.nn.optim import OptimizerState, adam_step
from src.utils.exceptions import ShapeError
from src.utils.seeding import make_rng

TOLERANCE = 1e-6


def projected(forward, upstream):
    """把输出与固定的上游梯度做内积，得到标量损失。"""
    return lambda: float(np.sum(forward() * upstream))


class TestConv2d:
    def setup_method(self):
        """准备随机输入、卷积核与上游梯度。"""
        rng = make_rng(1)
        self.x = rng.normal(size=(2, 3, 6, 6))
        self.kernels = rng.normal(size=(4, 3, 3, 3))
        self.bias = rng.normal(size=4)
        self.upstream = rng.normal(size=(2, 4, 6, 6))

    def _out(self):
        return P.conv2d_forward(self.x, self.kernels, self.bias)[0]

    def test_gradients(self):
        """测试 dx、dkernels、dbias 与数值梯度一致。"""
        out, cache = P.conv2d_forward(self.x, self.kernels, self.bias)
        assert out.shape == (2, 4, 6, 6)
        dx, dk, db = P.conv2d_backward(self.upstream, cache)
        loss = projected(self._out, self.upstream)
        assert max_relative_error(dx, numerical_gradient(loss, self.x)) < TOLERANCE
        assert max_relative_error(dk, numerical_gradient(loss, self.kernels)) < TOLERANCE
        assert max_relative_error(db, numerical_gradient(loss, self.bias)) < TOLERANCE

    def test_identity_kernel(self):
        """测试中心为 1 的卷积核是恒等映射。"""
        kernels = np.zeros((1, 1, 3, 3))
        kernels[0, 0, 1, 1] = 1.0
        x = make_rng(2).normal(size=(1, 5, 5))
        out, _ = P.conv2d_forward(x, kernels, np.zeros(1))
        assert np.array_equal(out, x)

    def test_zero_padding(self):
        """测试全 1 卷积核在角上只累加 4 个格点。"""
        out, _ = P.conv2d_forward(np.ones((1, 1, 4, 4)), np.ones((1, 1, 3, 3)), np.zeros(1))
        assert out[0, 0, 0, 0] == 4.0
        assert out[0, 0, 1, 1] == 9.0

    def test_shape_errors(self):
        """测试通道数、核大小与偏置形状不匹配时报错。"""
        with pytest.raises(ShapeError):
            P.conv2d_forward(np.zeros((1, 2, 4, 4)), self.kernels, self.bias)
        with pytest.raises(ShapeError):
            P.conv2d_forward(np.zeros((1, 3, 4, 4)), np.zeros((4, 3, 5, 5)), self.bias)
        with pytest.raises(ShapeError):
            P.conv2d_forward(np.zeros((1, 3, 4, 4)), self.kernels, np.zeros(3))
        with pytest.raises(ShapeError):
            P.conv2d_forward(np.zeros((4, 4)), self.kernels, self.bias)


class TestMaxPool:
    def test_forward_and_first_argmax(self):
        """测试窗口最大值，平局时梯度流向行优先的第一个位置。"""
        x = np.array([[1.0, 2.0, 5.0, 5.0],
                      [3.0, 0.0, 5.0, 5.0],
                      [0.0, 0.0, 1.0, 1.0],
                      [0.0, 0.0, 1.0, 1.0]])
        out, cache = P.maxpool2x2_forward(x)
        assert np.array_equal(out, [[3.0, 5.0], [0.0, 1.0]])
        dx = P.maxpool2x2_backward(np.ones((2, 2)), cache)
        assert dx[1, 0] == 1.0
        assert dx[0, 2] == 1.0 and dx[0, 3] == 0.0 and dx[1, 2] == 0.0
        assert dx.sum() == 4.0

    def test_gradients(self):
        """测试无平局输入上的梯度。"""
        rng = make_rng(3)
        x = rng.permutation(64).reshape(1, 4, 4, 4).astype(np.float64)
        upstream = rng.normal(size=(1, 4, 2, 2))
        _, cache = P.maxpool2x2_forward(x)
        dx = P.maxpool2x2_backward(upstream, cache)
        numeric = numerical_gradient(projected(lambda: P.maxpool2x2_forward(x)[0], upstream), x)
        assert max_relative_error(dx, numeric) < TOLERANCE

    def test_odd_extent_rejected(self):
        """测试奇数空间尺寸报错。"""
        with pytest.raises(ShapeError):
            P.maxpool2x2_forward(np.zeros((3, 4)))

    def test_mask_pooling(self):
        """测试任一细格有效则粗格有效。"""
        mask = np.array([[0, 0, 0, 1],
                         [0, 0, 0, 0],
                         [0, 0, 0, 0],
                         [1, 0, 0, 0]])
        assert np.array_equal(P.pool_mask(mask), [[0, 1], [1, 0]])


class TestMaskedSoftmax:
    def setup_method(self):
        """准备两个样本的分数、特征与部分掩码。"""
        rng = make_rng(4)
        self.scores = rng.normal(size=(2, 4, 4))
        self.features = rng.normal(size=(2, 3, 4, 4))
        self.mask = (rng.random((2, 4, 4)) > 0.4).astype(np.float64)
        self.mask[:, 0, 0] = 1.0
        self.upstream = rng.normal(size=(2, 3))

    def _out(self, eps=P.ATTENTION_EPS):
        return P.masked_softmax_sum_forward(self.scores, self.features, self.mask, eps)[0]

    def test_weights_ignore_invalid_cells(self):
        """测试无效格的特征不影响输出。"""
        base = self._out()
        self.features = self.features + 100.0 * (self.mask == 0)[:, None, :, :]
        assert np.allclose(self._out(), base, rtol=0, atol=1e-12)

    def test_weights_sum_to_one(self):
        """测试有效格上权重之和为 1（相差 ε 量级）。"""
        ones = np.ones_like(self.features)
        assert np.allclose(P.masked_softmax_sum_forward(self.scores, ones, self.mask)[0], 1.0, atol=1e-7)

    def test_eps_added_after_max_shift(self):
        """测试 ε 加在平移后的分母上：权重之和为 Σe^(s-m) / (Σe^(s-m) + ε)，与分数整体平移无关。"""
        eps = 0.5
        ones = np.ones_like(self.features)
        shifted = np.exp(self.scores - np.max(np.where(self.mask > 0, self.scores, -np.inf), axis=(1, 2),
                                              keepdims=True)) * self.mask
        total = shifted.sum(axis=(1, 2))
        out = P.masked_softmax_sum_forward(self.scores, ones, self.mask, eps)[0]
        assert np.allclose(out, (total / (total + eps))[:, None], rtol=0, atol=1e-12)
        moved = P.masked_softmax_sum_forward(self.scores - 30.0, ones, self.mask, eps)[0]
        assert np.allclose(moved, out, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("eps", [P.ATTENTION_EPS, 0.5])
    def test_gradients(self, eps):
        """测试分数与特征的梯度，包括较大的 ε。"""
        _, cache = P.masked_softmax_sum_forward(self.scores, self.features, self.mask, eps)
        dscores, dfeatures = P.masked_softmax_sum_backward(self.upstream, cache)
        loss = projected(lambda: self._out(eps), self.upstream)
        numeric_scores = numerical_gradient(loss, self.scores)
        numeric_features = numerical_gradient(loss, self.features)
        assert max_relative_error(dscores, numeric_scores) < TOLERANCE
        assert max_relative_error(dfeatures, numeric_features) < TOLERANCE
        assert np.all(dscores[self.mask == 0] == 0.0)

    def test_all_invalid_falls_back_to_uniform(self):
        """测试没有有效格时退化为均匀平均，且分数梯度为零。"""
        mask = np.zeros((4, 4))
        features = make_rng(5).normal(size=(3, 4, 4))
        out, cache = P.masked_softmax_sum_forward(np.zeros((4, 4)), features, mask)
        assert np.allclose(out, features.reshape(3, -1).mean(axis=1), rtol=0, atol=1e-12)
        dscores, dfeatures = P.masked_softmax_sum_backward(np.ones(3), cache)
        assert np.all(dscores == 0.0)
        assert np.allclose(dfeatures, 1.0 / 16)

    def test_shape_mismatch(self):
        """测试分数、特征与掩码形状不一致时报错。"""
        with pytest.raises(ShapeError):
            P.masked_softmax_sum_forward(self.scores, self.features[..., :2], self.mask)
        with pytest.raises(ShapeError):
            P.masked_softmax_sum_forward(self.scores, self.features, self.mask[0])


class TestDenseLayers:
    def setup_method(self):
        rng = make_rng(6)
        self.x = rng.normal(size=(5, 4))
        self.weight = rng.normal(size=(3, 4))
        self.bias = rng.normal(size=3)
        self.upstream = rng.normal(size=(5, 3))

    def test_linear_gradients(self):
        """测试仿射层的三个梯度。"""
        _, cache = P.linear_forward(self.x, self.weight, self.bias)
        dx, dw, db = P.linear_backward(self.upstream, cache)
        loss = projected(lambda: P.linear_forward(self.x, self.weight, self.bias)[0], self.upstream)
        assert max_relative_error(dx, numerical_gradient(loss, self.x)) < TOLERANCE
        assert max_relative_error(dw, numerical_gradient(loss, self.weight)) < TOLERANCE
        assert max_relative_error(db, numerical_gradient(loss, self.bias)) < TOLERANCE

    def test_linear_shape_error(self):
        """测试输入宽度不匹配时报错。"""
        with pytest.raises(ShapeError):
            P.linear_forward(np.zeros((2, 5)), self.weight, self.bias)

    def test_relu_gradients(self):
        """测试 ReLU 梯度（输入远离 0）。"""
        x = np.array([[-2.0, 0.5], [1.5, -0.3]])
        out, positive = P.relu_forward(x)
        assert np.array_equal(out, [[0.0, 0.5], [1.5, 0.0]])
        upstream = np.array([[1.0, 2.0], [3.0, 4.0]])
        numeric = numerical_gradient(projected(lambda: P.relu_forward(x)[0], upstream), x)
        assert np.allclose(P.relu_backward(upstream, positive), numeric)

    def test_dropout_eval_is_identity(self):
        """测试推理模式下 dropout 为恒等映射。"""
        out, scale = P.dropout_forward(self.x, 0.2, train=False)
        assert out is self.x and scale is None

    def test_dropout_train(self):
        """测试训练时的 inverted dropout 与反向传播。"""
        out, scale = P.dropout_forward(np.ones((200, 50)), 0.2, train=True, rng=make_rng(7))
        kept = scale > 0
        assert np.allclose(out[kept], 1.25)
        assert abs(kept.mean() - 0.8) < 0.02
        assert np.array_equal(P.dropout_backward(np.ones((200, 50)), scale), scale)

    def test_dropout_arguments(self):
        """测试非法比率与缺失生成器。"""
        with pytest.raises(ValueError):
            P.dropout_forward(self.x, 1.0, train=True, rng=make_rng(0))
        with pytest.raises(ValueError):
            P.dropout_forward(self.x, 0.2, train=True)


class TestLosses:
    def test_smooth_l1_values(self):
        """测试二次段与线性段。"""
        loss, grad = smooth_l1(np.array([0.5, 3.0]), np.array([0.0, 0.0]))
        assert loss == pytest.approx((0.125 + 2.5) / 2)
        assert np.allclose(grad, [0.25, 0.5])

    def test_smooth_l1_gradient(self):
        """测试 SmoothL1 的数值梯度（误差远离 ±β）。"""
        pred = np.array([0.3, -2.0, 1.7, -0.4])
        target = np.zeros(4)
        _, grad = smooth_l1(pred, target)
        numeric = numerical_gradient(lambda: smooth_l1(pred, target)[0], pred)
        assert max_relative_error(grad, numeric) < TOLERANCE

    def test_bce_stable_for_large_logits(self):
        """测试极大 logits 不溢出。"""
        loss, grad = bce_with_logits(np.array([800.0, -800.0]), np.array([1.0, 0.0]))
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.isfinite(grad))

    def test_bce_gradient(self):
        """测试 BCE-with-logits 的数值梯度。"""
        z = np.array([0.3, -1.2, 2.5, 0.0])
        y = np.array([1.0, 0.0, 0.0, 1.0])
        loss, grad = bce_with_logits(z, y)
        assert loss > 0
        numeric = numerical_gradient(lambda: bce_with_logits(z, y)[0], z)
        assert max_relative_error(grad, numeric) < TOLERANCE

    def test_shape_mismatch(self):
        """测试形状不一致时报错。"""
        with pytest.raises(ShapeError):
            smooth_l1(np.zeros(3), np.zeros(4))
        with pytest.raises(ShapeError):
            bce_with_logits(np.zeros(3), np.zeros((3, 1)))


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        """测试偏差校正后第一步的步长约为学习率。"""
        params = {"w": np.array([1.0, -1.0])}
        state = OptimizerState.for_params(params, learning_rate=0.1)
        adam_step(params, {"w": np.array([3.0, -0.01])}, state)
        assert np.allclose(params["w"], [0.9, -0.9], atol=1e-6)
        assert state.step == 1

    def test_minimizes_quadratic(self):
        """测试在二次函数上收敛。"""
        params = {"w": np.array([5.0, -3.0])}
        state = OptimizerState.for_params(params, learning_rate=0.05)
        for _ in range(2000):
            adam_step(params, {"w": 2.0 * params["w"]}, state)
        assert np.max(np.abs(params["w"])) < 0.1

    def test_missing_gradient_leaves_parameter(self):
        """测试没有梯度的参数保持不变。"""
        params = {"a": np.ones(2), "b": np.ones(2)}
        state = OptimizerState.for_params(params)
        adam_step(params, {"a": np.ones(2)}, state)
        assert np.array_equal(params["b"], np.ones(2))

    def test_shape_mismatch(self):
        """测试梯度形状不一致时报错。"""
        params = {"w": np.zeros(3)}
        with pytest.raises(ShapeError):
            adam_step(params, {"w": np.zeros(2)}, OptimizerState.for_params(params))

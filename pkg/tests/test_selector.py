"""
Unit tests for the tail-aware selection rule.
"""

import math

import numpy as np
import pytest

from src.domain.labels.performance import TailPrior
from src.domain.selection.selector import SELECTION_MODES, catastrophe_penalty, select
from src.utils.exceptions import ConfigurationError, InputError


def prior_with(rho) -> TailPrior:
    rho = np.asarray(rho, dtype=np.float64)
    return TailPrior(p_cap=np.zeros_like(rho), p_q90=np.zeros_like(rho), rho=rho, sbs_quantile=10.0)


def logit(p):
    return math.log(p / (1.0 - p))


class TestSelect:
    def test_catastrophe_penalty_example(self):
        """测试 ŷ_reg = {0.1, 0.5}、p̂_cat = {0.9, 0.1}、cap = 100 时选第二个算法。"""
        result = select(np.array([0.1, 0.5]), np.array([logit(0.9), logit(0.1)]), None, cap=100.0)
        assert result.scores[0] == pytest.approx(4.705, abs=1e-3)
        assert result.scores[1] == pytest.approx(0.5)
        assert result.chosen == 1
        assert result.penalized.tolist() == [True, False]
        assert result.catastrophe_probability[0] == pytest.approx(0.9)

    def test_threshold_at_half(self):
        """测试 σ(ŷ_cat) = 0.5 时施加惩罚。"""
        result = select(np.array([0.0, 1.0]), np.array([0.0, -1.0]), None, cap=math.e ** 2)
        assert result.penalized.tolist() == [True, False]
        assert result.chosen == 1

    def test_shift_invariance(self):
        """测试给所有 ŷ_reg 加同一常数不改变选择。"""
        rng = np.random.default_rng(0)
        for _ in range(100):
            y = rng.normal(size=5)
            logits = rng.normal(size=5)
            prior = prior_with(rng.random(5))
            base = select(y, logits, prior, cap=50.0).chosen
            assert select(y + rng.normal() * 10, logits, prior, cap=50.0).chosen == base

    def test_tie_takes_lowest_index(self):
        """测试分数并列时取最小下标。"""
        assert select(np.array([2.0, 1.0, 1.0]), None, None, cap=10.0).chosen == 1

    def test_modes_are_distinct(self):
        """测试四种模式在构造的数据上分别选出不同算法。"""
        y_reg = np.array([0.0, 0.5, 1.0, 1.5])
        logits = np.array([1.0, -1.0, 1.0, -1.0])
        prior = prior_with([3.0, 3.0, 0.0, 0.0])
        cap = math.e ** 2
        chosen = {mode: select(y_reg, logits, prior, cap, mode=mode).chosen for mode in SELECTION_MODES}
        assert chosen == {"regression-only": 0, "no-prior": 1, "no-catastrophe": 2, "full": 3}

    def test_missing_catastrophe_head_skips_term(self):
        """测试 catastrophe 头缺失时只用回归输出与先验。"""
        result = select(np.array([0.0, 0.5]), None, prior_with([1.0, 0.0]), cap=100.0)
        assert result.chosen == 1
        assert result.catastrophe_probability is None
        assert not result.penalized.any()

    def test_linear_target_penalty(self):
        """测试线性回归目标下惩罚取 cap。"""
        assert catastrophe_penalty(100.0, "linear") == 100.0
        assert catastrophe_penalty(100.0) == pytest.approx(math.log(100.0))
        result = select(np.array([10.0, 60.0]), np.array([1.0, -1.0]), None, cap=100.0,
                        regression_target="linear")
        assert result.scores[0] == 110.0
        assert result.chosen == 1

    def test_invalid_arguments(self):
        """测试未知模式、形状不一致与非法 cap。"""
        with pytest.raises(ConfigurationError):
            select(np.zeros(2), None, None, cap=10.0, mode="greedy")
        with pytest.raises(InputError):
            select(np.zeros(2), np.zeros(3), None, cap=10.0)
        with pytest.raises(InputError):
            select(np.zeros(2), None, prior_with([0.0, 0.0, 0.0]), cap=10.0)
        with pytest.raises(InputError):
            catastrophe_penalty(1.0)

"""
尾部感知的算法选择规则：

    s_a = ŷ_reg,a + λ_cat · 1[σ(ŷ_cat,a) ≥ 0.5] + ρ_a,    â = argmin_a s_a

σ(z) ≥ 0.5 等价于 z ≥ 0，实现直接判断 logit 的符号。λ_cat = log(cap)；
回归目标为线性 relERT 时惩罚取 cap 本身。四种模式对应度量消融：
full、no-prior、no-catastrophe、regression-only。
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from ..labels.performance import TailPrior
from ...utils.exceptions import ConfigurationError, InputError

SELECTION_MODES = ("full", "no-prior", "no-catastrophe", "regression-only")


@dataclass(frozen=True)
class SelectionResult:
    chosen: int
    scores: np.ndarray
    catastrophe_probability: Optional[np.ndarray]
    penalized: np.ndarray


def catastrophe_penalty(cap: float, regression_target: str = "log") -> float:
    """灾难惩罚 λ_cat，与回归目标处于同一量纲。"""
    if cap <= 1:
        raise InputError(f"cap must exceed 1 when the catastrophe term is active, got {cap}")
    return math.log(cap) if regression_target == "log" else float(cap)


def select(y_reg: np.ndarray, y_cat_logits: Optional[np.ndarray], prior: Optional[TailPrior],
           cap: float, mode: str = "full", regression_target: str = "log") -> SelectionResult:
    """对一个数据点打分并选出算法；并列时取最小下标。

    y_cat_logits 为 None（catastrophe 头被消融）时跳过惩罚项。
    """
    if mode not in SELECTION_MODES:
        raise ConfigurationError(f"unknown selection mode: {mode}")
    y_reg = np.asarray(y_reg, dtype=np.float64)
    n = y_reg.shape[0]
    use_catastrophe = mode in ("full", "no-prior") and y_cat_logits is not None
    use_prior = mode in ("full", "no-catastrophe") and prior is not None

    scores = y_reg.copy()
    penalized = np.zeros(n, dtype=bool)
    probability = None
    if y_cat_logits is not None:
        logits = np.asarray(y_cat_logits, dtype=np.float64)
        if logits.shape != (n,):
            raise InputError(f"catastrophe logits have shape {logits.shape}, expected ({n},)")
        probability = expit(logits)
        if use_catastrophe:
            penalized = logits >= 0.0
            scores = scores + catastrophe_penalty(cap, regression_target) * penalized
    if use_prior:
        if prior.rho.shape != (n,):
            raise InputError(f"tail prior covers {prior.rho.shape[0]} algorithms, expected {n}")
        scores = scores + prior.rho

    return SelectionResult(chosen=int(np.argmin(scores)), scores=scores,
                           catastrophe_probability=probability, penalized=penalized)

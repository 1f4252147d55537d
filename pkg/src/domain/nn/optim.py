"""
Adam 优化器（带偏差校正）。参数与梯度都是以名字为键的 numpy 数组字典。
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ...utils.exceptions import ShapeError

Params = Dict[str, np.ndarray]


@dataclass
class OptimizerState:
    """每个参数的一、二阶矩累积量与步数计数。"""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Params = field(default_factory=dict)
    second_moment: Params = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Params, **hyper) -> "OptimizerState":
        state = cls(**hyper)
        for name, value in params.items():
            state.first_moment[name] = np.zeros_like(value)
            state.second_moment[name] = np.zeros_like(value)
        return state


def adam_step(params: Params, grads: Params, state: OptimizerState) -> Params:
    """原地更新 params 与 state，并返回 params。没有梯度的参数保持不变。"""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for name, grad in grads.items():
        value = params[name]
        if grad.shape != value.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter {value.shape}")
        m = state.first_moment.setdefault(name, np.zeros_like(value))
        v = state.second_moment.setdefault(name, np.zeros_like(value))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params

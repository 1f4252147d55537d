"""
中心差分梯度检验。
"""

from typing import Callable

import numpy as np

FD_STEP = 1e-5


def numerical_gradient(loss: Callable[[], float], array: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """对 array 的每个元素做中心差分；loss 在调用时读取 array 的当前值。"""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = array[idx]
        array[idx] = original + h
        plus = loss()
        array[idx] = original - h
        minus = loss()
        array[idx] = original
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| 除以两个数组中的最大绝对值。"""
    diff = float(np.max(np.abs(analytic - numeric)))
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), floor)
    return diff / scale

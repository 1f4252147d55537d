"""
分位数工具。

整个项目统一使用线性插值分位数（numpy 的 "linear" 方法），
探测模块的 IQR、标签模块的 q^SBS_0.9 以及评估统计共用此约定。
"""

from typing import Sequence, Tuple

import numpy as np

from .exceptions import InputError


def quantile(values: Sequence[float], q: float) -> float:
    """线性插值分位数。"""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InputError("quantile of an empty sequence")
    return float(np.quantile(arr, q, method="linear"))


def iqr(values: Sequence[float]) -> float:
    """四分位距 Q3 - Q1。"""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        return 0.0
    q1, q3 = np.quantile(arr, [0.25, 0.75], method="linear")
    return float(q3 - q1)


def summary(values: Sequence[float]) -> Tuple[float, float, float]:
    """返回 (均值, 中位数, 90 分位数)。"""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InputError("statistics of an empty sequence")
    median, p90 = np.quantile(arr, [0.5, 0.9], method="linear")
    return float(arr.mean()), float(median), float(p90)

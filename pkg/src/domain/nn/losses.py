"""
损失函数：SmoothL1（β = 1）与数值稳定的 BCE-with-logits。两者都按元素取平均。
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from ...utils.exceptions import ShapeError

SMOOTH_L1_BETA = 1.0


def _check_pair(a: np.ndarray, b: np.ndarray, name: str):
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")


def smooth_l1(pred: np.ndarray, target: np.ndarray, beta: float = SMOOTH_L1_BETA,
              weights: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """返回 (损失, d损失/d pred)。|e| < β 时为 0.5e²/β，否则 |e| - 0.5β。"""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_pair(pred, target, "smooth_l1")
    e = pred - target
    small = np.abs(e) < beta
    per_entry = np.where(small, 0.5 * e * e / beta, np.abs(e) - 0.5 * beta)
    grad = np.where(small, e / beta, np.sign(e))
    if weights is not None:
        per_entry = per_entry * weights
        grad = grad * weights
    n = per_entry.size
    return float(per_entry.sum() / n), grad / n


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """返回 (损失, d损失/d logits)。

    使用 max(z,0) - z·y + log(1 + e^{-|z|})，对大的 |z| 也不会溢出。
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_pair(z, y, "bce_with_logits")
    per_entry = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = per_entry.size
    return float(per_entry.sum() / n), (expit(z) - y) / n

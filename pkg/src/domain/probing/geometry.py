"""
切片几何：随机正交标架与切片参数采样。

方向矩阵 O 由 d×w 的高斯矩阵经修正 Gram-Schmidt 正交化得到，
其分布是 Stiefel 流形 V_w(R^d) 上的 Haar 测度。
"""

import math
from dataclasses import dataclass

import numpy as np

from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError

logger = get_logger(__name__)

# 正交化过程中任一中间范数低于该值时重新抽样
DEGENERATE_NORM = 1e-12
# 重新抽样次数上限，超过说明生成器本身有问题
MAX_REDRAWS = 64

SCALE_MIN = 0.02
SCALE_MAX = 0.7


def orthonormalize(g: np.ndarray) -> np.ndarray:
    """对 g 的各列做修正 Gram-Schmidt（两遍）。

    任何中间范数 < DEGENERATE_NORM 时抛出 ValueError，由调用方重新抽样。
    """
    q = np.array(g, dtype=np.float64, copy=True)
    _, width = q.shape
    for _ in range(2):
        for j in range(width):
            for i in range(j):
                q[:, j] -= np.dot(q[:, i], q[:, j]) * q[:, i]
            norm = np.linalg.norm(q[:, j])
            if norm < DEGENERATE_NORM:
                raise ValueError("degenerate column during orthonormalization")
            q[:, j] /= norm
    return q


def random_orthonormal(dimension: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """抽取一个 d×w 的 Haar 分布正交标架；w == d 时即随机正交矩阵。"""
    if width > dimension:
        raise ValueError(f"frame width {width} exceeds dimension {dimension}")
    for attempt in range(MAX_REDRAWS):
        g = rng.standard_normal((dimension, width))
        try:
            return orthonormalize(g)
        except ValueError:
            logger.debug(f"Redrawing degenerate Gaussian frame (attempt {attempt + 1})")
    raise RuntimeError("could not draw a non-degenerate Gaussian frame")


def sample_orientation(dimension: int, rng: np.random.Generator) -> np.ndarray:
    """切片方向 O ∈ R^{d×2}，满足 OᵀO = I₂。"""
    if dimension < 2:
        raise ValueError(f"orientation needs dimension >= 2, got {dimension}")
    return random_orthonormal(dimension, 2, rng)


def sample_scale(rng: np.random.Generator, scale_min: float = SCALE_MIN,
                 scale_max: float = SCALE_MAX, distribution: str = "log_uniform") -> float:
    """切片边长 ℓ。默认 log ℓ ~ U(log ℓ_min, log ℓ_max)；uniform 为消融变体。"""
    if distribution == "log_uniform":
        value = math.exp(rng.uniform(math.log(scale_min), math.log(scale_max)))
    elif distribution == "uniform":
        value = rng.uniform(scale_min, scale_max)
    else:
        raise ConfigurationError(f"unknown scale distribution: {distribution}")
    # exp/log 往返可能越过端点一个 ulp
    return min(max(value, scale_min), scale_max)


@dataclass(frozen=True)
class SliceParams:
    """一个切片的 (c, O, ℓ)。"""
    centre: np.ndarray
    orientation: np.ndarray
    scale: float

    @property
    def dimension(self) -> int:
        return int(self.centre.shape[0])

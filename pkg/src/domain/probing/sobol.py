"""
切片中心的加扰 Sobol 采样。

使用 scipy.stats.qmc.Sobol（线性矩阵加扰 + 数字平移）。该加扰保留 Sobol
序列的初等区间分层性质：前 2^m 个点在任一坐标上的投影恰好各落入一个
长度为 2^-m 的二进区间。
"""

import math
from typing import List

import numpy as np
from scipy.stats import qmc

from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError
from ...utils.seeding import make_rng

logger = get_logger(__name__)

# scipy 自带方向数表支持的最大维度
MAX_DIMENSION = qmc.Sobol.MAXDIM

# 与方向/尺度流区分的流标签
CENTRE_STREAM = 0


def sample_centres(count: int, dimension: int, seed: int) -> List[np.ndarray]:
    """返回 count 个位于 [0,1)^d 的加扰 Sobol 点。

    总是抽取 2^ceil(log2 count) 个点再取前 count 个，
    以保证 count 为 2 的幂时的分层性质并避免 scipy 的平衡性警告。
    """
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    if dimension < 1:
        raise ConfigurationError(f"dimension must be >= 1, got {dimension}")
    if dimension > MAX_DIMENSION:
        raise ConfigurationError(
            f"dimension {dimension} exceeds the Sobol direction-number table ({MAX_DIMENSION})")

    engine = qmc.Sobol(d=dimension, scramble=True, seed=make_rng(seed, CENTRE_STREAM))
    m = max(0, math.ceil(math.log2(count)))
    points = engine.random_base2(m)[:count]
    logger.debug(f"Drew {count} Sobol centres in dimension {dimension} (m={m})")
    return [np.array(p, dtype=np.float64) for p in points]

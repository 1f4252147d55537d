"""
种子派生与随机数生成器。

所有随机流都来自 Philox（计数器型 64 位生成器），种子通过
numpy.random.SeedSequence 对整数元组进行混合得到：

    mix_seed(a, b, c, ...) = SeedSequence([_SALT, a, b, c, ...]).generate_state(1, uint64)[0]

同样的整数元组在任何机器上都得到同样的 64 位种子，不同的元组得到互不相关的流。
"""

from typing import Union

import numpy as np

# 固定盐值，区分本项目与其他使用 SeedSequence 的代码
_SALT = 0x6E0_9A5

SeedLike = Union[int, np.integer]


def mix_seed(*parts: SeedLike) -> int:
    """把若干非负整数混合成一个 64 位种子。"""
    entropy = [_SALT] + [int(p) for p in parts]
    for p in entropy:
        if p < 0:
            raise ValueError(f"seed components must be non-negative, got {p}")
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(*parts: SeedLike) -> np.random.Generator:
    """由整数元组派生一个 Philox 生成器。"""
    return np.random.Generator(np.random.Philox(mix_seed(*parts)))

"""
交叉验证划分协议：LIO（留一实例）、Random（按 (f,d,i) 分组随机）、LPO（留一问题函数）。

数据点标识为 (function_id, dimension, instance_id, repetition)。同一 (f,d,i) 的
所有重复在任何协议下都落在同一侧。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError
from ...utils.seeding import make_rng

logger = get_logger(__name__)

DatapointId = Tuple[int, int, int, int]
DEFAULT_FOLDS = 5
SPLIT_STREAM = 31


@dataclass(frozen=True)
class Fold:
    train: Tuple[DatapointId, ...]
    test: Tuple[DatapointId, ...]


@dataclass(frozen=True)
class SplitPlan:
    protocol: str
    folds: Tuple[Fold, ...]

    def __len__(self) -> int:
        return len(self.folds)


class ISplitStrategy(ABC):
    """划分策略接口。"""

    name: str = ""

    @abstractmethod
    def assign(self, index: Sequence[DatapointId], num_folds: int, seed: int) -> List[List[DatapointId]]:
        """返回每折的测试数据点列表。"""
        pass


class LeaveInstanceOut(ISplitStrategy):
    """第 j 折留出每个 (f, d) 的第 j 个实例（按实例编号排序）。"""

    name = "LIO"

    def assign(self, index, num_folds, seed):
        instances: Dict[Tuple[int, int], List[int]] = {}
        for f, d, i, _ in index:
            instances.setdefault((f, d), [])
            if i not in instances[(f, d)]:
                instances[(f, d)].append(i)
        rank = {(f, d, i): pos for (f, d), ids in instances.items() for pos, i in enumerate(sorted(ids))}
        most = max(len(ids) for ids in instances.values())
        count = min(num_folds, most)
        folds: List[List[DatapointId]] = [[] for _ in range(count)]
        for dp in index:
            folds[rank[dp[:3]] % count].append(dp)
        return folds


class GroupedRandom(ISplitStrategy):
    """按种子打乱 (f, d, i) 分组后均分到各折。"""

    name = "Random"

    def assign(self, index, num_folds, seed):
        groups = sorted({dp[:3] for dp in index})
        if len(groups) < num_folds:
            raise ConfigurationError(f"{len(groups)} instance groups cannot fill {num_folds} folds")
        order = make_rng(seed, SPLIT_STREAM).permutation(len(groups))
        fold_of = {}
        for fold, chunk in enumerate(np.array_split(order, num_folds)):
            for g in chunk:
                fold_of[groups[int(g)]] = fold
        folds: List[List[DatapointId]] = [[] for _ in range(num_folds)]
        for dp in index:
            folds[fold_of[dp[:3]]].append(dp)
        return folds


class LeaveProblemOut(ISplitStrategy):
    """每个函数一折：测试集为该函数在所有维度上的全部数据点。"""

    name = "LPO"

    def assign(self, index, num_folds, seed):
        functions = sorted({dp[0] for dp in index})
        return [[dp for dp in index if dp[0] == f] for f in functions]


STRATEGIES: Dict[str, ISplitStrategy] = {s.name: s for s in (LeaveInstanceOut(), GroupedRandom(), LeaveProblemOut())}


def make_split(protocol: str, index: Iterable[DatapointId], seed: int = 0,
               num_folds: int = DEFAULT_FOLDS) -> SplitPlan:
    """按协议生成划分；每折的训练集为测试集在索引中的补集。"""
    if protocol not in STRATEGIES:
        raise ConfigurationError(f"unknown protocol '{protocol}', expected one of {sorted(STRATEGIES)}")
    ordered = sorted({tuple(int(v) for v in dp) for dp in index})
    if not ordered:
        raise ConfigurationError("cannot split an empty dataset index")
    tests = STRATEGIES[protocol].assign(ordered, num_folds, seed)
    folds = []
    for test in tests:
        if not test:
            continue
        held_out = set(test)
        train = tuple(dp for dp in ordered if dp not in held_out)
        if not train:
            raise ConfigurationError(f"{protocol} fold holding out {len(held_out)} datapoints "
                                     "leaves nothing to train on")
        folds.append(Fold(train=train, test=tuple(test)))
    logger.debug(f"{protocol} split: {len(folds)} folds over {len(ordered)} datapoints")
    return SplitPlan(protocol=protocol, folds=tuple(folds))

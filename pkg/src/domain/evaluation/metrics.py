"""
relERT 统计量、差距闭合率、尾部象限计数、选择频率与生存曲线。
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from ...utils.exceptions import InputError
from ...utils.quantiles import summary

QUADRANTS = ("Neither", "SBS-only", "Both", "AS-only")


def statistics(values: Sequence[float]) -> Tuple[float, float, float]:
    """(均值, 中位数, 90 分位数)，线性插值分位数。"""
    return summary(values)


def gap_closure(sbs_stat: float, as_stat: float, vbs_stat: float = 1.0) -> float:
    """(SBS - AS) / (SBS - VBS)；SBS 等于 VBS 时返回 0。结果可以为负。"""
    if sbs_stat == vbs_stat:
        return 0.0
    return (sbs_stat - as_stat) / (sbs_stat - vbs_stat)


@dataclass(frozen=True)
class QuadrantCounts:
    neither: int
    sbs_only: int
    both: int
    as_only: int

    @property
    def total(self) -> int:
        return self.neither + self.sbs_only + self.both + self.as_only

    def as_dict(self) -> Dict[str, int]:
        return dict(zip(QUADRANTS, (self.neither, self.sbs_only, self.both, self.as_only)))


def tail_quadrants(as_values: Sequence[float], sbs_values: Sequence[float],
                   threshold: Union[float, Sequence[float]]) -> QuadrantCounts:
    """按 relERT > x（严格）对每个数据点分类。threshold 可以是标量或逐点数组。"""
    a = np.asarray(as_values, dtype=np.float64)
    s = np.asarray(sbs_values, dtype=np.float64)
    if a.shape != s.shape:
        raise InputError(f"selector values {a.shape} and SBS values {s.shape} are not aligned")
    x = np.broadcast_to(np.asarray(threshold, dtype=np.float64), a.shape)
    as_tail = a > x
    sbs_tail = s > x
    return QuadrantCounts(neither=int(np.sum(~as_tail & ~sbs_tail)),
                          sbs_only=int(np.sum(~as_tail & sbs_tail)),
                          both=int(np.sum(as_tail & sbs_tail)),
                          as_only=int(np.sum(as_tail & ~sbs_tail)))


def survival_curve(values: Sequence[float], thresholds: Sequence[float]) -> np.ndarray:
    """P(relERT > t) 在每个 t 上的经验值。"""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise InputError("survival curve of an empty sequence")
    t = np.asarray(thresholds, dtype=np.float64)
    return 1.0 - np.searchsorted(v, t, side="right") / v.size


def log_grid(upper: float, points: int = 64) -> np.ndarray:
    """[1, upper] 上的对数网格。"""
    return np.logspace(0.0, np.log10(max(upper, 1.0 + 1e-9)), points)


def selection_frequencies(chosen: Sequence[int], num_algorithms: int) -> np.ndarray:
    """每个算法被选中的频率（和为 1；输入为空时全为 0）。"""
    counts = np.bincount(np.asarray(chosen, dtype=int), minlength=num_algorithms).astype(np.float64)
    total = counts.sum()
    return counts / total if total else counts


def selection_accuracy(chosen_relert: Sequence[float]) -> float:
    """所选算法即为该行 VBS（relERT == 1）的数据点比例。"""
    v = np.asarray(chosen_relert, dtype=np.float64)
    if v.size == 0:
        raise InputError("selection accuracy of an empty sequence")
    return float(np.mean(v == 1.0))

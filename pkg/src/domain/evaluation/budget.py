"""
探测预算扫描与探测耗时表。

budget_sweep 对每个 (k, r) 重新生成探测数据集并运行一次协议评估；
每个格子的评估成本为 k·r² 次函数调用。
"""

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .protocol import Report, SelectionConfig, run_protocol
from .splits import DatapointId, DEFAULT_FOLDS
from ..labels.performance import LabelTable
from ..model.network import check_resolution
from ..model.training import TrainConfig
from ..probing.slicer import SliceSet, build_probe_set
from ..suite.bbob import make_instance
from ...infrastructure.logger import get_logger
from ...utils.seeding import mix_seed

logger = get_logger(__name__)

# (k, r) -> (数据集, 每个 SliceSet 的构建耗时秒数)
DatasetBuilder = Callable[[int, int], Tuple[Mapping[DatapointId, SliceSet], Sequence[float]]]

COST_SLICES = 128
COST_STREAM = 41


@dataclass
class BudgetCell:
    k: int
    r: int
    evaluations: int
    statistics: Tuple[float, float, float]
    mean_probe_seconds: float
    report: Optional[Report] = None


def budget_sweep(k_values: Sequence[int], r_values: Sequence[int], protocol: str,
                 build_dataset: DatasetBuilder, labels: LabelTable, train_cfg: TrainConfig,
                 selection: Optional[SelectionConfig] = None, num_folds: int = DEFAULT_FOLDS,
                 split_seed: int = 0, keep_reports: bool = False) -> List[BudgetCell]:
    """返回 k × r 网格上每格的选择器 (mean, median, p90) relERT。"""
    for r in r_values:
        check_resolution(r)
    cells: List[BudgetCell] = []
    for k in k_values:
        for r in r_values:
            dataset, timings = build_dataset(k, r)
            report = run_protocol(dataset, labels, train_cfg, protocol, selection=selection,
                                  num_folds=num_folds, split_seed=split_seed)
            cell = BudgetCell(k=k, r=r, evaluations=k * r * r,
                              statistics=report.overall().selector,
                              mean_probe_seconds=float(np.mean(timings)) if len(timings) else 0.0,
                              report=report if keep_reports else None)
            logger.info(f"Budget cell k={k} r={r}: {cell.evaluations} evaluations, "
                        f"median relERT {cell.statistics[1]:.3f}")
            cells.append(cell)
    return cells


def heatmap_grid(cells: Sequence[BudgetCell], statistic: int = 1) -> Tuple[List[int], List[int], np.ndarray]:
    """把格子整理为 (k 列表, r 列表, 值矩阵[k, r])。"""
    ks = sorted({c.k for c in cells})
    rs = sorted({c.r for c in cells})
    grid = np.full((len(ks), len(rs)), np.nan)
    for c in cells:
        grid[ks.index(c.k), rs.index(c.r)] = c.statistics[statistic]
    return ks, rs, grid


def timed_probe_set(instance, k: int, r: int, seed: int, **kwargs) -> Tuple[SliceSet, float]:
    start = time.perf_counter()
    slice_set = build_probe_set(instance, k, r, seed, **kwargs)
    return slice_set, time.perf_counter() - start


def probing_cost_table(resolutions: Sequence[int], dimensions: Sequence[int], k: int = COST_SLICES,
                       repeats: int = 3, function_id: int = 1, seed: int = 0) -> List[Dict[str, float]]:
    """每个 (r, d) 构建一个 k 切片探测集的平均墙钟时间。"""
    rows = []
    for d in dimensions:
        instance = make_instance(function_id, d, 1)
        for r in resolutions:
            seconds = [timed_probe_set(instance, k, r, mix_seed(seed, COST_STREAM, d, r, rep))[1]
                       for rep in range(repeats)]
            rows.append({"resolution": r, "dimension": d, "slices": k,
                         "evaluations": k * r * r, "mean_seconds": float(np.mean(seconds))})
            logger.debug(f"Probing cost r={r} d={d}: {rows[-1]['mean_seconds']:.4f}s")
    return rows

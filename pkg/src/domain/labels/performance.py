"""
性能标签：ERT、relERT、PAR10 截断、灾难标签、SBS 与尾部先验。

UNDEFINED（没有任何成功运行的 ERT）在数组中用 NaN 表示。
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ...infrastructure.logger import get_logger
from ...utils.exceptions import DataError, InputError
from ...utils.quantiles import quantile

logger = get_logger(__name__)

UNDEFINED = math.nan
PAR_FACTOR = 10.0
SBS_QUANTILE = 0.9
LAMBDA_CAP = 3.0
LAMBDA_Q90 = 3.0
SBS_CRITERIA = ("mean", "median")

ProblemKey = Tuple[int, int]


@dataclass(frozen=True)
class RunRecord:
    """一次求解器运行：到达目标（距最优 1e-2 以内）所用评估次数与是否成功。"""
    function_id: int
    dimension: int
    instance_id: int
    algorithm: str
    evaluations: float
    success: bool

    def __post_init__(self):
        if self.evaluations < 1:
            raise InputError(f"evaluations must be >= 1, got {self.evaluations}")


def compute_ert(runs: Sequence[RunRecord]) -> float:
    """ΣFE / ΣSucc，跨实例汇总；没有成功运行时返回 UNDEFINED。"""
    if not runs:
        raise InputError("cannot compute ERT from an empty run list")
    keys = {(r.function_id, r.dimension, r.algorithm) for r in runs}
    if len(keys) != 1:
        raise InputError(f"runs mix several (function, dimension, algorithm) groups: {sorted(keys)}")
    evaluations = float(sum(r.evaluations for r in runs))
    successes = sum(1 for r in runs if r.success)
    if successes == 0:
        return UNDEFINED
    return evaluations / successes


def compute_relert(ert_row: Sequence[float]) -> np.ndarray:
    """relERT = ERT / 行内最小有限 ERT；UNDEFINED 原样保留。"""
    row = np.asarray(ert_row, dtype=np.float64)
    finite = np.isfinite(row)
    if not finite.any():
        raise DataError("every algorithm in the row is UNDEFINED")
    best = row[finite].min()
    out = np.full(row.shape, UNDEFINED)
    out[finite] = row[finite] / best
    return out


def impute_par10(table: np.ndarray) -> Tuple[np.ndarray, float]:
    """cap = 10 × 全表最大有限 relERT，所有 UNDEFINED 替换为 cap。"""
    arr = np.asarray(table, dtype=np.float64)
    finite = np.isfinite(arr)
    if not finite.any():
        raise DataError("no finite relERT entry in the table")
    cap = PAR_FACTOR * float(arr[finite].max())
    capped = np.where(finite, arr, cap)
    return capped, cap


def catastrophe_labels(capped: np.ndarray, cap: float) -> np.ndarray:
    """c = 1[relERT == cap]，严格相等。"""
    return np.asarray(capped, dtype=np.float64) == cap


def identify_sbs(train_rows: np.ndarray, criterion: str = "mean") -> Tuple[int, float]:
    """SBS = 训练行上平均（或中位）截断 relERT 最小的算法；并列取最小下标。

    返回 (SBS 下标, SBS 在训练行上的 90 分位 relERT)。
    """
    rows = np.asarray(train_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InputError("identify_sbs needs a non-empty 2-D table of training rows")
    if criterion == "mean":
        aggregate = rows.mean(axis=0)
    elif criterion == "median":
        aggregate = np.median(rows, axis=0)
    else:
        raise InputError(f"unknown SBS criterion: {criterion}")
    # argmin 返回首个最小值
    sbs = int(np.argmin(aggregate))
    return sbs, quantile(rows[:, sbs], SBS_QUANTILE)


@dataclass(frozen=True)
class TailPrior:
    """每个算法的静态尾部风险先验 ρ_a = λ_cap·p_cap + λ_0.9·p_0.9。"""
    p_cap: np.ndarray
    p_q90: np.ndarray
    rho: np.ndarray
    sbs_quantile: float
    lambda_cap: float = LAMBDA_CAP
    lambda_q90: float = LAMBDA_Q90

    @classmethod
    def zeros(cls, num_algorithms: int) -> "TailPrior":
        z = np.zeros(num_algorithms)
        return cls(p_cap=z, p_q90=z.copy(), rho=z.copy(), sbs_quantile=math.inf)


def tail_prior(train_rows: np.ndarray, train_catastrophe: np.ndarray, sbs_quantile: float,
               lambda_cap: float = LAMBDA_CAP, lambda_q90: float = LAMBDA_Q90) -> TailPrior:
    """只用训练划分估计 p_cap 与 p_0.9（严格 > q^SBS_0.9）。"""
    rows = np.asarray(train_rows, dtype=np.float64)
    flags = np.asarray(train_catastrophe, dtype=bool)
    if rows.shape != flags.shape or rows.shape[0] == 0:
        raise InputError("tail_prior needs aligned, non-empty training rows and catastrophe flags")
    p_cap = flags.mean(axis=0)
    p_q90 = (rows > sbs_quantile).mean(axis=0)
    rho = lambda_cap * p_cap + lambda_q90 * p_q90
    return TailPrior(p_cap=p_cap, p_q90=p_q90, rho=rho, sbs_quantile=sbs_quantile,
                     lambda_cap=lambda_cap, lambda_q90=lambda_q90)


@dataclass
class LabelTable:
    """每个 (f, d) 问题一行的截断 relERT 表。"""
    algorithms: List[str]
    problems: List[ProblemKey]
    relert: np.ndarray
    cap: float
    catastrophe: np.ndarray
    raw_relert: np.ndarray
    vbs: np.ndarray = field(default=None)
    source_hash: Optional[str] = None

    def __post_init__(self):
        if self.vbs is None:
            self.vbs = np.argmin(self.relert, axis=1)
        self._index: Dict[ProblemKey, int] = {p: i for i, p in enumerate(self.problems)}

    @property
    def num_algorithms(self) -> int:
        return len(self.algorithms)

    def index_of(self, function_id: int, dimension: int) -> int:
        try:
            return self._index[(function_id, dimension)]
        except KeyError:
            raise DataError(f"no label row for function {function_id}, dimension {dimension}")

    def row(self, function_id: int, dimension: int) -> np.ndarray:
        return self.relert[self.index_of(function_id, dimension)]

    def catastrophe_row(self, function_id: int, dimension: int) -> np.ndarray:
        return self.catastrophe[self.index_of(function_id, dimension)]

    def to_dict(self) -> dict:
        def encode(arr):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in arr]
        return {
            "algorithms": list(self.algorithms),
            "problems": [list(p) for p in self.problems],
            "cap": self.cap,
            "relert": self.relert.tolist(),
            "raw_relert": encode(self.raw_relert),
            "catastrophe": self.catastrophe.astype(int).tolist(),
            "vbs": [int(v) for v in self.vbs],
            "source_hash": self.source_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LabelTable":
        raw = np.array([[UNDEFINED if v is None else v for v in row] for row in data["raw_relert"]],
                       dtype=np.float64)
        return cls(algorithms=list(data["algorithms"]),
                   problems=[(int(f), int(d)) for f, d in data["problems"]],
                   relert=np.array(data["relert"], dtype=np.float64),
                   cap=float(data["cap"]),
                   catastrophe=np.array(data["catastrophe"], dtype=bool),
                   raw_relert=raw,
                   vbs=np.array(data["vbs"], dtype=int),
                   source_hash=data.get("source_hash"))


def build_label_table(ert: Dict[ProblemKey, Dict[str, float]], algorithms: Optional[Iterable[str]] = None,
                      source_hash: Optional[str] = None) -> LabelTable:
    """由每个问题的 {算法: ERT 或 UNDEFINED} 构造截断后的 LabelTable。"""
    if not ert:
        raise DataError("no problems to label")
    if algorithms is None:
        algorithms = list(dict.fromkeys(a for key in sorted(ert) for a in ert[key]))
    algorithms = list(algorithms)
    problems = sorted(ert)
    raw = np.full((len(problems), len(algorithms)), UNDEFINED)
    for i, key in enumerate(problems):
        ert_row = [ert[key].get(a, UNDEFINED) for a in algorithms]
        raw[i] = compute_relert(ert_row)

    for j, name in enumerate(algorithms):
        if not np.isfinite(raw[:, j]).any():
            logger.warning(f"Algorithm '{name}' never reaches the target on any problem")

    capped, cap = impute_par10(raw)
    flags = catastrophe_labels(capped, cap)
    logger.info(f"Label table: {len(problems)} problems x {len(algorithms)} algorithms, "
                f"cap {cap:.4g}, {int(flags.sum())} imputed entries")
    return LabelTable(algorithms=algorithms, problems=problems, relert=capped, cap=cap,
                      catastrophe=flags, raw_relert=raw, source_hash=source_hash)


def ert_from_runs(runs: Iterable[RunRecord]) -> Dict[ProblemKey, Dict[str, float]]:
    """按 (f, d, a) 汇总运行记录为 ERT。"""
    groups: Dict[Tuple[int, int, str], List[RunRecord]] = {}
    for run in runs:
        groups.setdefault((run.function_id, run.dimension, run.algorithm), []).append(run)
    ert: Dict[ProblemKey, Dict[str, float]] = {}
    for (f, d, a), group in groups.items():
        ert.setdefault((f, d), {})[a] = compute_ert(group)
    return ert

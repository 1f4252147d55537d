"""
合成性能标签：两个函数族、两个求解器，按确定性规则生成 ERT。

族 A（各向同性、光滑）由 solver1 最快求解，族 B（高频多峰）由 solver2 最快求解；
另一求解器慢 slowdown 倍。cap_rate > 0 时 cap_solvers 中的求解器在每个条目上以该概率被注入为失败
（没有成功运行）。
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.domain.labels.ingest import ERT_COLUMNS
from src.domain.labels.performance import UNDEFINED
from src.infrastructure.logger import get_logger
from src.utils.exceptions import ConfigurationError
from src.utils.seeding import make_rng

logger = get_logger(__name__)

SOLVERS = ("solver1", "solver2")
NOISE_STREAM = 51
FAILURE_STREAM = 52


@dataclass(frozen=True)
class SyntheticLabels:
    """生成结果：ERT 表与被注入失败的条目列表。"""
    ert: Dict[Tuple[int, int], Dict[str, float]]
    failures: List[Tuple[int, int, str]]

    @property
    def num_rows(self) -> int:
        return len(self.ert)

    def vbs(self, function_id: int, dimension: int) -> str:
        row = self.ert[(function_id, dimension)]
        finite = {a: v for a, v in row.items() if math.isfinite(v)}
        return min(finite, key=finite.get)

    def to_frame(self) -> pd.DataFrame:
        records = []
        for (f, d), row in sorted(self.ert.items()):
            for name in SOLVERS:
                value = row[name]
                finite = math.isfinite(value)
                records.append({"function_id": f, "dimension": d, "algorithm": name,
                                "ert": repr(float(value)) if finite else "", "finite_flag": int(finite)})
        return pd.DataFrame.from_records(records, columns=list(ERT_COLUMNS))


def family_of(function_id: int, family_a: Sequence[int], family_b: Sequence[int]) -> int:
    if function_id in family_a:
        return 0
    if function_id in family_b:
        return 1
    raise ConfigurationError(f"function {function_id} belongs to neither synthetic family")


def generate_labels(family_a: Sequence[int], family_b: Sequence[int], dimensions: Sequence[int],
                    base_ert: float = 1000.0, slowdown: float = 20.0, noise: float = 0.1,
                    cap_rate: float = 0.0, seed: int = 7,
                    cap_solvers: Optional[Sequence[str]] = None) -> SyntheticLabels:
    """按族规则生成每个 (f, d) 两个求解器的 ERT；cap_solvers 为 None 时两个求解器都可能失败。"""
    overlap = set(family_a) & set(family_b)
    if overlap:
        raise ConfigurationError(f"functions {sorted(overlap)} appear in both synthetic families")
    if not family_a or not family_b:
        raise ConfigurationError("both synthetic families need at least one function")
    if slowdown <= 1.0:
        raise ConfigurationError(f"slowdown must exceed 1, got {slowdown}")
    if not 0.0 <= noise < 1.0:
        raise ConfigurationError(f"noise must be in [0, 1), got {noise}")
    if not 0.0 <= cap_rate <= 1.0:
        raise ConfigurationError(f"cap_rate must be in [0, 1], got {cap_rate}")
    unknown = sorted(set(cap_solvers or ()) - set(SOLVERS))
    if unknown:
        raise ConfigurationError(f"unknown cap_solvers {unknown}, expected names from {list(SOLVERS)}")
    cappable = np.array([name in (SOLVERS if cap_solvers is None else cap_solvers) for name in SOLVERS])

    ert: Dict[Tuple[int, int], Dict[str, float]] = {}
    failures: List[Tuple[int, int, str]] = []
    for f in sorted(set(family_a) | set(family_b)):
        best = family_of(f, family_a, family_b)
        for d in sorted(dimensions):
            jitter = make_rng(seed, NOISE_STREAM, f, d).uniform(-noise, noise, size=len(SOLVERS))
            fast = base_ert * d * (1.0 + jitter[0])
            slow = base_ert * d * slowdown * (1.0 + jitter[1])
            row = {SOLVERS[best]: fast, SOLVERS[1 - best]: slow}
            failed = (make_rng(seed, FAILURE_STREAM, f, d).random(len(SOLVERS)) < cap_rate) & cappable
            if failed.all():
                # 整行失败没有 relERT，保留该族的最优求解器
                failed[best] = False
            for j, name in enumerate(SOLVERS):
                if failed[j]:
                    row[name] = UNDEFINED
                    failures.append((f, d, name))
            ert[(f, d)] = row
    logger.info(f"Synthetic labels: {len(ert)} problems, {len(failures)} injected failures")
    return SyntheticLabels(ert=ert, failures=failures)


def write_labels_csv(labels: SyntheticLabels, path: str) -> Path:
    """写出 ERT 格式的 CSV，可直接由 ingest(fmt='ert') 读取。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels.to_frame().to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Synthetic labels written to {path}")
    return path

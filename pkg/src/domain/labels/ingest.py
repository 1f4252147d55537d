"""
性能数据 CSV 导入（UTF-8，首行为表头）。

运行格式（每行一次运行）：

    function_id,dimension,instance_id,algorithm,evaluations,success

预聚合 ERT 格式（每行一个 (f, d, a)）：

    function_id,dimension,algorithm,ert,finite_flag

finite_flag 为 0 时该 ERT 视为 UNDEFINED，ert 字段可以为空。
错误信息中的行号按文件行计（表头为第 1 行）。
"""

import hashlib
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from .performance import UNDEFINED, LabelTable, RunRecord, build_label_table, ert_from_runs
from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError, IngestionError

logger = get_logger(__name__)

RUN_COLUMNS = ("function_id", "dimension", "instance_id", "algorithm", "evaluations", "success")
ERT_COLUMNS = ("function_id", "dimension", "algorithm", "ert", "finite_flag")
TRUE_VALUES = {"1", "true", "yes"}
FALSE_VALUES = {"0", "false", "no"}


def file_hash(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read(path: str, columns: Sequence[str]) -> pd.DataFrame:
    if not Path(path).is_file():
        raise IngestionError(f"performance file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8",
                        skipinitialspace=True)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise IngestionError(f"missing columns {missing}", line_number=1)
    return frame


def _line(row_index: int) -> int:
    return row_index + 2


def _integer(frame: pd.DataFrame, column: str, minimum: int) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | (values % 1 != 0) | (values < minimum)
    if bad.any():
        i = int(bad.to_numpy().nonzero()[0][0])
        raise IngestionError(f"{column} must be an integer >= {minimum}, got '{frame[column].iloc[i]}'",
                             line_number=_line(i))
    return values.astype(int)


def _number(frame: pd.DataFrame, column: str, minimum: float, allow_blank=None) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | (values < minimum)
    if allow_blank is not None:
        bad &= ~allow_blank
    if bad.any():
        i = int(bad.to_numpy().nonzero()[0][0])
        raise IngestionError(f"{column} must be a number >= {minimum}, got '{frame[column].iloc[i]}'",
                             line_number=_line(i))
    return values


def _flag(frame: pd.DataFrame, column: str) -> pd.Series:
    lowered = frame[column].str.strip().str.lower()
    bad = ~lowered.isin(TRUE_VALUES | FALSE_VALUES)
    if bad.any():
        i = int(bad.to_numpy().nonzero()[0][0])
        raise IngestionError(f"{column} must be 0/1 or true/false, got '{frame[column].iloc[i]}'",
                             line_number=_line(i))
    return lowered.isin(TRUE_VALUES)


def _algorithms(frame: pd.DataFrame) -> pd.Series:
    names = frame["algorithm"].str.strip()
    empty = names == ""
    if empty.any():
        i = int(empty.to_numpy().nonzero()[0][0])
        raise IngestionError("algorithm name is empty", line_number=_line(i))
    return names


def read_runs_csv(path: str) -> List[RunRecord]:
    frame = _read(path, RUN_COLUMNS)
    f = _integer(frame, "function_id", 1)
    d = _integer(frame, "dimension", 1)
    inst = _integer(frame, "instance_id", 1)
    algorithms = _algorithms(frame)
    evaluations = _number(frame, "evaluations", 1.0)
    success = _flag(frame, "success")
    runs = [RunRecord(function_id=int(f.iloc[i]), dimension=int(d.iloc[i]), instance_id=int(inst.iloc[i]),
                      algorithm=algorithms.iloc[i], evaluations=float(evaluations.iloc[i]),
                      success=bool(success.iloc[i]))
            for i in range(len(frame))]
    logger.info(f"Read {len(runs)} runs from {path}")
    return runs


def read_ert_csv(path: str) -> Dict[Tuple[int, int], Dict[str, float]]:
    frame = _read(path, ERT_COLUMNS)
    f = _integer(frame, "function_id", 1)
    d = _integer(frame, "dimension", 1)
    algorithms = _algorithms(frame)
    finite = _flag(frame, "finite_flag")
    ert = _number(frame, "ert", 1.0, allow_blank=~finite)
    table: Dict[Tuple[int, int], Dict[str, float]] = {}
    for i in range(len(frame)):
        key = (int(f.iloc[i]), int(d.iloc[i]))
        row = table.setdefault(key, {})
        name = algorithms.iloc[i]
        if name in row:
            raise IngestionError(f"duplicate entry for algorithm '{name}' on problem {key}",
                                 line_number=_line(i))
        row[name] = float(ert.iloc[i]) if finite.iloc[i] else UNDEFINED
    logger.info(f"Read ERT for {len(table)} problems from {path}")
    return table


def ingest(path: str, fmt: str = "runs") -> LabelTable:
    """读取 runs 或 ert 格式的 CSV 并构造截断的 LabelTable。"""
    if fmt == "runs":
        ert = ert_from_runs(read_runs_csv(path))
    elif fmt == "ert":
        ert = read_ert_csv(path)
    else:
        raise ConfigurationError(f"unknown performance format: {fmt}")
    return build_label_table(ert, source_hash=file_hash(path))

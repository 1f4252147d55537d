"""
报告输出：JSON（全部原始记录加汇总）、按 (函数组, 维度) 排布的 CSV 统计表、
尾部象限表、选择频率表、预算热力图网格与探测耗时表。
"""

from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd

from ..domain.evaluation.budget import BudgetCell, heatmap_grid
from ..domain.evaluation.metrics import QUADRANTS
from ..domain.evaluation.protocol import STAT_NAMES, DatapointRecord, Report
from ..infrastructure.dataset_store import read_json, write_json
from ..infrastructure.logger import get_logger
from ..utils.exceptions import SerializationError

logger = get_logger(__name__)

REPORT_VERSION = 1
NON_IMPROVING_MARK = "†"


def report_to_dict(report: Report) -> Dict[str, Any]:
    return {
        "format_version": REPORT_VERSION,
        "protocol": report.protocol,
        "algorithms": list(report.algorithms),
        "num_models": report.num_models,
        "records": [asdict(r) for r in report.records],
        "cells": [{"group": c.group, "dimension": c.dimension, "count": c.count,
                   "sbs": list(c.sbs), "selector": list(c.selector), "closure": list(c.closure),
                   "accuracy": c.accuracy} for c in report.cells],
        "quadrants": {name: q.as_dict() for name, q in report.quadrants.items()},
        "frequencies": report.frequencies,
    }


def report_from_dict(data: Dict[str, Any]) -> Report:
    """由原始记录重建 Report；汇总字段全部重新计算。"""
    if data.get("format_version") != REPORT_VERSION:
        raise SerializationError(f"report format version {data.get('format_version')!r}, "
                                 f"expected {REPORT_VERSION}")
    try:
        records = [DatapointRecord(**r) for r in data["records"]]
        return Report.from_records(data["protocol"], data["algorithms"], records,
                                   num_models=int(data.get("num_models", 0)))
    except (KeyError, TypeError) as e:
        raise SerializationError(f"malformed report ({e})")


def write_report_json(report: Report, path) -> Path:
    write_json(report_to_dict(report), path)
    logger.info(f"Report written: {path}")
    return Path(path)


def read_report_json(path) -> Report:
    return report_from_dict(read_json(path))


def cells_frame(report: Report) -> pd.DataFrame:
    """每个 (函数组, 维度) 一行：SBS、选择器统计、闭合率与 † 标记。"""
    rows = []
    for c in report.cells:
        row: Dict[str, Any] = {"group": c.group, "dimension": c.dimension, "count": c.count}
        for n, stat in enumerate(STAT_NAMES):
            row[f"sbs_{stat}"] = c.sbs[n]
            row[f"selector_{stat}"] = c.selector[n]
            row[f"closure_{stat}"] = c.closure[n]
            row[f"flag_{stat}"] = NON_IMPROVING_MARK if c.non_improving[n] else ""
        row["accuracy"] = c.accuracy
        rows.append(row)
    return pd.DataFrame(rows)


def quadrants_frame(report: Report) -> pd.DataFrame:
    rows = [dict(threshold=name, **q.as_dict(), total=q.total) for name, q in report.quadrants.items()]
    return pd.DataFrame(rows, columns=["threshold", *QUADRANTS, "total"])


def frequencies_frame(report: Report) -> pd.DataFrame:
    frame = pd.DataFrame(report.frequencies, index=list(report.algorithms))
    frame.index.name = "algorithm"
    return frame.reset_index()


def heatmap_frame(cells: Sequence[BudgetCell], statistic: int = 1) -> pd.DataFrame:
    """行为 k、列为 r 的网格。"""
    ks, rs, grid = heatmap_grid(cells, statistic)
    frame = pd.DataFrame(grid, index=ks, columns=[f"r={r}" for r in rs])
    frame.index.name = "k"
    return frame.reset_index()


def budget_frame(cells: Sequence[BudgetCell]) -> pd.DataFrame:
    rows = []
    for c in cells:
        row = {"k": c.k, "r": c.r, "evaluations": c.evaluations, "mean_probe_seconds": c.mean_probe_seconds}
        row.update({f"selector_{s}": c.statistics[n] for n, s in enumerate(STAT_NAMES)})
        rows.append(row)
    return pd.DataFrame(rows)


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6g")
    logger.debug(f"CSV written: {path}")
    return path


def write_report_tables(report: Report, directory, prefix: str = "") -> List[Path]:
    """写出统计表、象限表与频率表三个 CSV。"""
    directory = Path(directory)
    return [write_csv(cells_frame(report), directory / f"{prefix}cells.csv"),
            write_csv(quadrants_frame(report), directory / f"{prefix}quadrants.csv"),
            write_csv(frequencies_frame(report), directory / f"{prefix}frequencies.csv")]

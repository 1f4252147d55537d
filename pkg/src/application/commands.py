"""
命令层：generate、ingest、evaluate、sweep、synthetic-labels。

每个命令只接收一个 RunConfig，读写 output.directory 下的固定布局：

    dataset/            SliceSet 文件、manifest.json、probing_cost.csv
    labels.json         截断后的 LabelTable
    synthetic_labels.csv
    reports/<协议>/     report.json、CSV 表与 4 张 SVG
    models/<协议>/      每折的参数检查点
    sweep/<协议>/       预算扫描表、热力图与探测耗时网格
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.application.synthetic import generate_labels, write_labels_csv
from src.domain.evaluation.budget import (BudgetCell, budget_sweep, heatmap_grid, probing_cost_table,
                                          timed_probe_set)
from src.domain.evaluation.protocol import Report, run_protocol
from src.domain.evaluation.splits import DatapointId
from src.domain.labels.ingest import file_hash, ingest
from src.domain.labels.performance import LabelTable
from src.domain.model.training import TrainResult
from src.domain.probing.slicer import Provenance, SliceSet
from src.domain.suite.bbob import make_instance
from src.infrastructure.config import RunConfig
from src.infrastructure.dataset_store import (build_manifest, load_dataset, load_label_table, read_manifest,
                                              save_checkpoint, save_label_table, save_slice_set,
                                              slice_set_filename, write_manifest)
from src.infrastructure.logger import get_logger
from src.presentation import svg
from src.presentation.reports import (budget_frame, heatmap_frame, write_csv, write_report_json,
                                      write_report_tables)
from src.utils.exceptions import ConfigurationError, DataError
from src.utils.seeding import mix_seed

logger = get_logger(__name__)

SVG_NAMES = ("histogram.svg", "survival.svg", "frequencies.svg", "heatmap.svg")


@dataclass(frozen=True)
class OutputLayout:
    root: Path

    @classmethod
    def of(cls, run: RunConfig) -> "OutputLayout":
        return cls(Path(run.output_directory))

    @property
    def dataset(self) -> Path:
        return self.root / "dataset"

    @property
    def labels(self) -> Path:
        return self.root / "labels.json"

    @property
    def synthetic_labels(self) -> Path:
        return self.root / "synthetic_labels.csv"

    def reports(self, protocol: str) -> Path:
        return self.root / "reports" / protocol

    def models(self, protocol: str) -> Path:
        return self.root / "models" / protocol

    def sweep(self, protocol: str) -> Path:
        return self.root / "sweep" / protocol


def _ensure_directory(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigurationError(f"cannot create output directory {path}: {e}")


def datapoint_seed(run: RunConfig, datapoint: DatapointId) -> int:
    return mix_seed(run.probing.seed, *datapoint)


def _probe(run: RunConfig, datapoint: DatapointId, k: int, r: int) -> Tuple[SliceSet, float]:
    f, d, i, rep = datapoint
    instance = make_instance(f, d, i, bound=run.suite.bound)
    return timed_probe_set(instance, k, r, datapoint_seed(run, datapoint),
                           scale_min=run.probing.scale_min, scale_max=run.probing.scale_max,
                           scale_distribution=run.probing.scale_distribution,
                           provenance=Provenance(f, d, i, rep))


def build_dataset(run: RunConfig, k: int, r: int) -> Tuple[Dict[DatapointId, SliceSet], List[float]]:
    """在内存中为整个 suite 构建探测数据集；workers > 1 时并行。"""
    datapoints = run.suite.datapoints()
    if run.probing.workers > 1:
        with ThreadPoolExecutor(max_workers=run.probing.workers) as pool:
            results = list(pool.map(lambda dp: _probe(run, dp, k, r), datapoints))
    else:
        results = [_probe(run, dp, k, r) for dp in datapoints]
    dataset = {dp: s for dp, (s, _) in zip(datapoints, results)}
    return dataset, [t for _, t in results]


def cmd_generate(run: RunConfig) -> Dict:
    """为每个 (f, d, i, rep) 写一个 SliceSet 文件，再写清单与耗时表。"""
    layout = OutputLayout.of(run)
    _ensure_directory(layout.dataset)
    k, r = run.probing.k, run.probing.r
    logger.info(f"Generating {len(run.suite.datapoints())} SliceSets (k={k}, r={r}) into {layout.dataset}")
    dataset, timings = build_dataset(run, k, r)

    entries = []
    cost_rows = []
    for (dp, slice_set), seconds in zip(dataset.items(), timings):
        name = slice_set_filename(*dp)
        try:
            digest = save_slice_set(slice_set, layout.dataset / name)
        except OSError as e:
            raise ConfigurationError(f"cannot write {layout.dataset / name}: {e}")
        entries.append({"file": name, "datapoint": list(dp), "seed": slice_set.seed,
                        "evaluations": slice_set.evaluations, "sha256": digest})
        cost_rows.append({"function_id": dp[0], "dimension": dp[1], "instance_id": dp[2],
                          "repetition": dp[3], "evaluations": slice_set.evaluations, "seconds": seconds})

    manifest = build_manifest(run.content_hash(), entries, k, r, settings=run.dataset_section())
    write_manifest(manifest, layout.dataset)
    write_csv(pd.DataFrame(cost_rows), layout.dataset / "probing_cost.csv")
    logger.info(f"Dataset written: {manifest['count']} files, {manifest['total_evaluations']} evaluations")
    return manifest


def label_source(run: RunConfig) -> Tuple[Path, str]:
    """(CSV 路径, 格式)；合成来源读取 synthetic-labels 的输出。"""
    if run.labels.source == "synthetic":
        return OutputLayout.of(run).synthetic_labels, "ert"
    return Path(run.labels.path), run.labels.source


def cmd_ingest(run: RunConfig) -> LabelTable:
    """读取性能 CSV，写出截断后的 LabelTable。"""
    path, fmt = label_source(run)
    if not path.is_file():
        hint = " (run synthetic-labels first)" if run.labels.source == "synthetic" else ""
        raise ConfigurationError(f"labels file not found: {path}{hint}")
    table = ingest(str(path), fmt)
    layout = OutputLayout.of(run)
    _ensure_directory(layout.root)
    save_label_table(table, layout.labels)
    logger.info(f"Label table written: {layout.labels} ({len(table.problems)} problems, "
                f"{table.num_algorithms} algorithms, cap {table.cap:.4g})")
    return table


def cmd_synthetic_labels(run: RunConfig) -> Path:
    """按两族规则生成合成 ERT CSV。"""
    spec = run.labels.synthetic
    labels = generate_labels(spec.family_a, spec.family_b, run.suite.dimensions, base_ert=spec.base_ert,
                             slowdown=spec.slowdown, noise=spec.noise, cap_rate=spec.cap_rate,
                             seed=spec.seed, cap_solvers=spec.cap_solvers)
    layout = OutputLayout.of(run)
    _ensure_directory(layout.root)
    return write_labels_csv(labels, str(layout.synthetic_labels))


def load_inputs(run: RunConfig) -> Tuple[Dict[DatapointId, SliceSet], LabelTable]:
    """读取数据集与标签，并核对两者与当前配置的哈希。"""
    layout = OutputLayout.of(run)
    if not layout.labels.is_file():
        raise DataError(f"label table not found: {layout.labels} (run ingest first)")
    manifest = read_manifest(layout.dataset)
    expected = run.content_hash()
    if manifest.get("config_hash") != expected:
        message = (f"dataset hash {manifest.get('config_hash')} does not match the configuration "
                   f"({expected}); regenerate the dataset or set output.force")
        if not run.force:
            raise DataError(message)
        logger.warning(message)

    table = load_label_table(layout.labels)
    source, _ = label_source(run)
    if source.is_file() and table.source_hash is not None:
        current = file_hash(str(source))
        if current != table.source_hash:
            message = f"label table was built from a different version of {source}; re-run ingest"
            if not run.force:
                raise DataError(message)
            logger.warning(message)

    dataset = load_dataset(layout.dataset, manifest)
    missing = sorted({dp[:2] for dp in dataset} - set(table.problems))
    if missing:
        raise DataError(f"no label rows for problems {missing}")
    return dataset, table


def _checkpoint_writer(directory: Path):
    def write(fold: int, result: TrainResult):
        save_checkpoint(result.network, directory / f"fold{fold}.ckpt", rng=result.rng,
                        metadata={"fold": fold, "final_loss": result.final_loss})
    return write


def render_plots(report: Report, directory: Path,
                 budget_cells: Optional[List[BudgetCell]] = None) -> List[Path]:
    """直方图、生存曲线、频率柱状图与热力图。

    没有预算扫描结果时，热力图画 (函数组, 维度) 网格上选择器的 relERT 中位数。
    """
    histogram = svg.relert_histogram({"selector": [r.as_relert for r in report.records],
                                      "SBS": [r.sbs_relert for r in report.records]},
                                     title=f"relERT distribution ({report.protocol})")
    curves = report.survival()
    survival = svg.survival_plot(curves["t"], {"selector": curves["selector"], "SBS": curves["sbs"]},
                                 title=f"P(relERT > t) ({report.protocol})")
    bars = svg.frequency_bars(report.algorithms, report.frequencies,
                              title=f"selection frequency ({report.protocol})")
    if budget_cells:
        ks, rs, grid = heatmap_grid(budget_cells)
        heat = svg.heatmap(ks, rs, grid, title=f"median relERT over (k, r) ({report.protocol})")
    else:
        groups = sorted({c.group for c in report.cells if c.group != "all"})
        dims = sorted({c.dimension for c in report.cells if c.dimension != "all"}, key=int)
        grid = np.full((len(groups), len(dims)), np.nan)
        for c in report.cells:
            if c.group in groups and c.dimension in dims:
                grid[groups.index(c.group), dims.index(c.dimension)] = c.selector[1]
        heat = svg.heatmap(groups, dims, grid, title=f"median relERT ({report.protocol})",
                           row_name="function group", col_name="dimension")
    return [canvas.save(directory / name)
            for canvas, name in zip((histogram, survival, bars, heat), SVG_NAMES)]


def cmd_evaluate(run: RunConfig, protocol: Optional[str] = None) -> Report:
    """按协议评估，写出 JSON/CSV 报告、4 张 SVG 与每折检查点。"""
    protocol = protocol or run.evaluation.protocol
    dataset, table = load_inputs(run)
    layout = OutputLayout.of(run)
    _ensure_directory(layout.models(protocol))
    report = run_protocol(dataset, table, run.model, protocol, selection=run.selection,
                          num_folds=run.evaluation.folds, split_seed=run.evaluation.seed,
                          on_model=_checkpoint_writer(layout.models(protocol)))
    directory = layout.reports(protocol)
    write_report_json(report, directory / "report.json")
    write_report_tables(report, directory)
    render_plots(report, directory)
    logger.info(f"Evaluation artefacts written to {directory}")
    return report


def cmd_sweep(run: RunConfig, protocol: Optional[str] = None) -> List[BudgetCell]:
    """(k, r) 预算扫描与探测耗时网格。"""
    protocol = protocol or run.evaluation.protocol
    layout = OutputLayout.of(run)
    if not layout.labels.is_file():
        raise DataError(f"label table not found: {layout.labels} (run ingest first)")
    table = load_label_table(layout.labels)
    cells = budget_sweep(run.evaluation.sweep_k, run.evaluation.sweep_r, protocol,
                         lambda k, r: build_dataset(run, k, r), table, run.model,
                         selection=run.selection, num_folds=run.evaluation.folds,
                         split_seed=run.evaluation.seed)
    directory = layout.sweep(protocol)
    _ensure_directory(directory)
    write_csv(budget_frame(cells), directory / "budget.csv")
    write_csv(heatmap_frame(cells), directory / "heatmap.csv")
    ks, rs, grid = heatmap_grid(cells)
    svg.heatmap(ks, rs, grid, title=f"median relERT over (k, r) ({protocol})").save(directory / "heatmap.svg")
    cost = probing_cost_table(run.evaluation.cost_resolutions, run.evaluation.cost_dimensions,
                              k=run.evaluation.cost_slices, repeats=run.evaluation.cost_repeats,
                              seed=run.probing.seed)
    write_csv(pd.DataFrame(cost), directory / "probing_cost_grid.csv")
    logger.info(f"Budget sweep written to {directory}")
    return cells

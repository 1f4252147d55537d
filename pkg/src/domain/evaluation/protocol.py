"""
协议评估：逐折训练、逐数据点选择、汇总成 Report。

每折的 SBS、q^SBS_0.9 与尾部先验只用该折训练数据点的标签行估计；
模型种子由 (协议, 折序号, 全局种子) 混合得到。
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .metrics import (QuadrantCounts, gap_closure, selection_accuracy, selection_frequencies,
                      statistics, survival_curve, tail_quadrants, log_grid)
from .splits import DatapointId, SplitPlan, make_split, DEFAULT_FOLDS
from ..labels.performance import LabelTable, identify_sbs, tail_prior, LAMBDA_CAP, LAMBDA_Q90
from ..model.training import TrainConfig, TrainResult, TrainingExample, predict_batch, train
from ..probing.slicer import SliceSet
from ..selection.selector import select
from ..suite.bbob import FUNCTION_GROUPS, function_group
from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError, DataError
from ...utils.seeding import mix_seed

logger = get_logger(__name__)

PROTOCOL_CODES = {"LIO": 1, "Random": 2, "LPO": 3}
ALL = "all"
ABSOLUTE_TAIL = 1000.0

# (折序号, 该折训练结果)
ModelCallback = Callable[[int, TrainResult], None]
STAT_NAMES = ("mean", "median", "p90")


@dataclass(frozen=True)
class SelectionConfig:
    mode: str = "full"
    sbs_criterion: str = "mean"
    lambda_cap: float = LAMBDA_CAP
    lambda_q90: float = LAMBDA_Q90


@dataclass(frozen=True)
class DatapointRecord:
    """一个测试数据点的原始结果。"""
    function_id: int
    dimension: int
    instance_id: int
    repetition: int
    fold: int
    chosen: int
    vbs: int
    sbs: int
    as_relert: float
    sbs_relert: float
    sbs_quantile: float

    @property
    def group(self) -> str:
        return function_group(self.function_id)


@dataclass
class CellSummary:
    group: str
    dimension: str
    count: int
    sbs: Tuple[float, float, float]
    selector: Tuple[float, float, float]
    closure: Tuple[float, float, float]
    accuracy: float

    @property
    def non_improving(self) -> Tuple[bool, bool, bool]:
        return tuple(c < 0 for c in self.closure)


@dataclass
class Report:
    protocol: str
    algorithms: List[str]
    records: List[DatapointRecord]
    cells: List[CellSummary] = field(default_factory=list)
    quadrants: Dict[str, QuadrantCounts] = field(default_factory=dict)
    frequencies: Dict[str, List[float]] = field(default_factory=dict)
    num_models: int = 0

    @classmethod
    def from_records(cls, protocol: str, algorithms: Sequence[str], records: Sequence[DatapointRecord],
                     num_models: int = 0) -> "Report":
        if not records:
            raise DataError("cannot build a report without test records")
        report = cls(protocol=protocol, algorithms=list(algorithms), records=list(records),
                     num_models=num_models)
        report.cells = summarize_cells(report.records)
        as_values = [r.as_relert for r in report.records]
        sbs_values = [r.sbs_relert for r in report.records]
        report.quadrants = {
            "q_sbs_0.9": tail_quadrants(as_values, sbs_values, [r.sbs_quantile for r in report.records]),
            "1000": tail_quadrants(as_values, sbs_values, ABSOLUTE_TAIL),
        }
        report.frequencies = frequency_table(report.records, len(algorithms))
        return report

    def overall(self) -> CellSummary:
        return next(c for c in self.cells if c.group == ALL and c.dimension == ALL)

    def cell(self, group: str, dimension) -> Optional[CellSummary]:
        dimension = str(dimension)
        return next((c for c in self.cells if c.group == group and c.dimension == dimension), None)

    def survival(self, thresholds: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
        """选择器与 SBS 的 P(relERT > t)。"""
        as_values = [r.as_relert for r in self.records]
        sbs_values = [r.sbs_relert for r in self.records]
        if thresholds is None:
            thresholds = log_grid(max(max(as_values), max(sbs_values)))
        return {"t": np.asarray(thresholds), "selector": survival_curve(as_values, thresholds),
                "sbs": survival_curve(sbs_values, thresholds)}


def _summarize(group: str, dimension: str, records: Sequence[DatapointRecord]) -> CellSummary:
    as_values = [r.as_relert for r in records]
    sbs_stats = statistics([r.sbs_relert for r in records])
    as_stats = statistics(as_values)
    closure = tuple(gap_closure(s, a) for s, a in zip(sbs_stats, as_stats))
    return CellSummary(group=group, dimension=dimension, count=len(records), sbs=sbs_stats,
                       selector=as_stats, closure=closure, accuracy=selection_accuracy(as_values))


def summarize_cells(records: Sequence[DatapointRecord]) -> List[CellSummary]:
    """(函数组, 维度) 网格，外加每组、每维度与整体的 all 汇总。"""
    dimensions = sorted({r.dimension for r in records})
    groups = [g for g in FUNCTION_GROUPS if any(r.group == g for r in records)]
    cells: List[CellSummary] = []
    for group in groups + [ALL]:
        for dim in dimensions + [ALL]:
            members = [r for r in records
                       if (group == ALL or r.group == group) and (dim == ALL or r.dimension == dim)]
            if members:
                cells.append(_summarize(group, str(dim), members))
    return cells


def frequency_table(records: Sequence[DatapointRecord], num_algorithms: int) -> Dict[str, List[float]]:
    """选择器与 VBS 的选择频率，分别在全部数据点与选择器尾部数据点上统计。"""
    tail = [r for r in records if r.as_relert > r.sbs_quantile]
    return {
        "selector_all": selection_frequencies([r.chosen for r in records], num_algorithms).tolist(),
        "vbs_all": selection_frequencies([r.vbs for r in records], num_algorithms).tolist(),
        "selector_tail": selection_frequencies([r.chosen for r in tail], num_algorithms).tolist(),
        "vbs_tail": selection_frequencies([r.vbs for r in tail], num_algorithms).tolist(),
    }


def fold_seed(protocol: str, fold: int, seed: int) -> int:
    return mix_seed(PROTOCOL_CODES[protocol], fold, seed)


def _examples(ids: Sequence[DatapointId], dataset: Mapping[DatapointId, SliceSet],
              labels: LabelTable) -> List[TrainingExample]:
    return [TrainingExample(slice_set=dataset[dp], relert=labels.row(dp[0], dp[1]),
                            catastrophe=labels.catastrophe_row(dp[0], dp[1]))
            for dp in ids]


def run_fold(fold_index: int, train_ids: Sequence[DatapointId], test_ids: Sequence[DatapointId],
             dataset: Mapping[DatapointId, SliceSet], labels: LabelTable, train_cfg: TrainConfig,
             selection: SelectionConfig, protocol: str,
             on_model: Optional[ModelCallback] = None) -> List[DatapointRecord]:
    """训练一折的模型并对测试数据点做选择。"""
    train_rows = np.stack([labels.row(dp[0], dp[1]) for dp in train_ids])
    train_flags = np.stack([labels.catastrophe_row(dp[0], dp[1]) for dp in train_ids])
    sbs, q90 = identify_sbs(train_rows, selection.sbs_criterion)
    prior = tail_prior(train_rows, train_flags, q90, selection.lambda_cap, selection.lambda_q90)

    cfg = replace(train_cfg, seed=fold_seed(protocol, fold_index, train_cfg.seed))
    result = train(_examples(train_ids, dataset, labels), cfg)
    if on_model is not None:
        on_model(fold_index, result)
    y_reg, y_cat = predict_batch(result.network, [dataset[dp] for dp in test_ids])

    records = []
    for n, dp in enumerate(test_ids):
        row = labels.row(dp[0], dp[1])
        chosen = select(y_reg[n], None if y_cat is None else y_cat[n], prior, labels.cap,
                        mode=selection.mode, regression_target=train_cfg.regression_target).chosen
        records.append(DatapointRecord(function_id=dp[0], dimension=dp[1], instance_id=dp[2],
                                       repetition=dp[3], fold=fold_index, chosen=chosen,
                                       vbs=int(labels.vbs[labels.index_of(dp[0], dp[1])]), sbs=sbs,
                                       as_relert=float(row[chosen]), sbs_relert=float(row[sbs]),
                                       sbs_quantile=q90))
    logger.info(f"{protocol} fold {fold_index}: trained on {len(train_ids)}, tested {len(test_ids)} "
                f"(SBS {labels.algorithms[sbs]})")
    return records


def run_protocol(dataset: Mapping[DatapointId, SliceSet], labels: LabelTable, train_cfg: TrainConfig,
                 protocol: str, selection: Optional[SelectionConfig] = None,
                 num_folds: int = DEFAULT_FOLDS, split_seed: int = 0,
                 plan: Optional[SplitPlan] = None, on_model: Optional[ModelCallback] = None) -> Report:
    """按协议逐折训练与选择，返回 Report。相同种子得到相同结果。"""
    if not dataset:
        raise ConfigurationError("cannot evaluate an empty dataset")
    selection = selection or SelectionConfig()
    plan = plan or make_split(protocol, dataset.keys(), seed=split_seed, num_folds=num_folds)
    records: List[DatapointRecord] = []
    for fold_index, fold in enumerate(plan.folds):
        records.extend(run_fold(fold_index, fold.train, fold.test, dataset, labels, train_cfg,
                                selection, protocol, on_model))
    report = Report.from_records(protocol, labels.algorithms, records, num_models=len(plan.folds))
    overall = report.overall()
    logger.info(f"{protocol}: selector mean/median/p90 = "
                f"{overall.selector[0]:.3f}/{overall.selector[1]:.3f}/{overall.selector[2]:.3f}, "
                f"SBS = {overall.sbs[0]:.3f}/{overall.sbs[1]:.3f}/{overall.sbs[2]:.3f}")
    return report

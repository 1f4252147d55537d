"""
切片栅格化、归一化与探测集构建。

一个切片是归一化搜索立方体 [0,1]^d 中的一个带方向正方形：

    x(u) = c + ℓ O u,   u ∈ [-1/2, 1/2]²

在 r×r 的端点网格 u_a = -1/2 + (a-1)/(r-1) 上求值。越界点先记入掩码，
再逐坐标截断到立方体内，映射到物理域后求值。
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .geometry import SliceParams, sample_orientation, sample_scale, SCALE_MIN, SCALE_MAX
from .sobol import sample_centres
from ..suite.bbob import ProblemInstance, evaluate_batch, to_physical
from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError
from ...utils.quantiles import iqr
from ...utils.seeding import make_rng

logger = get_logger(__name__)

# 无效格点与零极差切片的占位值
NEUTRAL_VALUE = 0.5
# 方向与尺度使用的流标签（中心使用 sobol.CENTRE_STREAM）
FRAME_STREAM = 1


@dataclass(frozen=True)
class Slice:
    """一个探测视图：归一化值图、有效性掩码与侧统计量。"""
    values: np.ndarray
    mask: np.ndarray
    scale: float
    value_range: float
    iqr: float

    @property
    def resolution(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class Provenance:
    """数据点标识 (f, d, i, rep)。"""
    function_id: int
    dimension: int
    instance_id: int
    repetition: int

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return self.function_id, self.dimension, self.instance_id, self.repetition


@dataclass
class SliceSet:
    """k 个切片加上环境维度 d；一个数据点的模型输入。"""
    slices: List[Slice]
    dimension: int
    provenance: Optional[Provenance] = None
    evaluations: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.slices:
            raise ConfigurationError("a SliceSet needs at least one slice")
        resolutions = {s.resolution for s in self.slices}
        if len(resolutions) != 1:
            raise ConfigurationError(f"slices must share one resolution, got {sorted(resolutions)}")

    @property
    def k(self) -> int:
        return len(self.slices)

    @property
    def resolution(self) -> int:
        return self.slices[0].resolution


def grid_coordinates(resolution: int) -> np.ndarray:
    """端点网格 u_a = -1/2 + (a-1)/(r-1)，a = 1..r。"""
    if resolution < 2:
        raise ConfigurationError(f"resolution must be >= 2, got {resolution}")
    return -0.5 + np.arange(resolution, dtype=np.float64) / (resolution - 1)


def slice_points(params: SliceParams, resolution: int) -> np.ndarray:
    """返回 (r, r, d) 的未截断格点，[a, b] 对应 (u_a, u_b)。"""
    u = grid_coordinates(resolution)
    ua, ub = np.meshgrid(u, u, indexing="ij")
    o = params.orientation
    offsets = ua[..., None] * o[:, 0] + ub[..., None] * o[:, 1]
    return params.centre + params.scale * offsets


def rasterize_slice(instance: ProblemInstance, params: SliceParams, resolution: int,
                    objective: Optional[Callable[[np.ndarray], np.ndarray]] = None
                    ) -> Tuple[np.ndarray, np.ndarray]:
    """在切片网格上求值，返回 (raw, mask)。

    objective 缺省为 evaluate_batch(instance, ·)；传入计数包装器可统计评估次数。
    """
    points = slice_points(params, resolution)
    mask = np.all((points >= 0.0) & (points <= 1.0), axis=-1).astype(np.uint8)
    clipped = np.clip(points, 0.0, 1.0).reshape(-1, params.dimension)
    physical = to_physical(clipped, instance.bounds)
    if objective is None:
        raw = evaluate_batch(instance, physical)
    else:
        raw = objective(physical)
    return raw.reshape(resolution, resolution), mask


def normalize_slice(raw: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """仅用有效格点做 min-max 归一化，返回 (X, Δ, q)。"""
    raw = np.asarray(raw, dtype=np.float64)
    valid = np.asarray(mask).astype(bool)
    values = np.full(raw.shape, NEUTRAL_VALUE)
    if not valid.any():
        return values, 0.0, 0.0

    observed = raw[valid]
    lo = float(observed.min())
    hi = float(observed.max())
    value_range = hi - lo
    spread = iqr(observed)
    if value_range > 0:
        values[valid] = (observed - lo) / value_range
    return values, value_range, spread


class EvaluationCounter:
    """包装实例的批量求值并累计评估次数。"""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.count = 0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        self.count += int(points.shape[0])
        return evaluate_batch(self.instance, points)


def build_probe_set(instance: ProblemInstance, k: int, r: int, seed: int,
                    scale_min: float = SCALE_MIN, scale_max: float = SCALE_MAX,
                    scale_distribution: str = "log_uniform",
                    provenance: Optional[Provenance] = None) -> SliceSet:
    """构建一个 k 切片、分辨率 r 的探测集，恰好消耗 k·r² 次评估。

    中心来自一条 Sobol 流；第 j 个切片的方向与尺度来自独立的 (seed, FRAME_STREAM, j) 流。
    """
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if r < 2:
        raise ConfigurationError(f"r must be >= 2, got {r}")

    d = instance.dimension
    centres = sample_centres(k, d, seed)
    counter = EvaluationCounter(instance)
    slices: List[Slice] = []
    for j, centre in enumerate(centres):
        rng = _frame_rng(seed, j)
        params = SliceParams(centre=centre,
                             orientation=sample_orientation(d, rng),
                             scale=sample_scale(rng, scale_min, scale_max, scale_distribution))
        raw, mask = rasterize_slice(instance, params, r, objective=counter)
        values, value_range, spread = normalize_slice(raw, mask)
        slices.append(Slice(values=values, mask=mask, scale=params.scale,
                            value_range=value_range, iqr=spread))

    logger.debug(f"Built probe set for f{instance.function_id} d={d} i={instance.instance_id} "
                 f"with {counter.count} evaluations")
    return SliceSet(slices=slices, dimension=d, provenance=provenance,
                    evaluations=counter.count, seed=seed)


def _frame_rng(seed: int, index: int) -> np.random.Generator:
    return make_rng(seed, FRAME_STREAM, index)

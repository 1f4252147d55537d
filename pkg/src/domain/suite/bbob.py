"""
BBOB 风格的 24 个可扩展连续测试函数。

函数公式沿用公开的 BBOB 定义；实例变换（平移、旋转、目标偏移）是
COCO 的带种子近似，而不是逐位复现：

- 平移 x_opt 在边界盒内侧 80% 区域均匀抽取；
- 旋转 R、Q 用探测模块的正交化在满秩下做 Haar 抽样（f1–f5 为单位阵）；
- f_opt ~ U(-100, 100)。

种子由 (function_id, dimension, instance_id) 经 utils.seeding.mix_seed 混合得到。
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..probing.geometry import random_orthonormal
from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError, InputError
from ...utils.seeding import make_rng

logger = get_logger(__name__)

NUM_FUNCTIONS = 24
DEFAULT_BOUND = 5.0
# 平移量只落在边界盒内侧 80% 区域
SHIFT_FRACTION = 0.8
F_OPT_RANGE = 100.0

# 标准 BBOB 分组（与结果表的行一致）
FUNCTION_GROUPS: Dict[str, Tuple[int, ...]] = {
    "f1-f5": (1, 2, 3, 4, 5),
    "f6-f9": (6, 7, 8, 9),
    "f10-f14": (10, 11, 12, 13, 14),
    "f15-f19": (15, 16, 17, 18, 19),
    "f20-f24": (20, 21, 22, 23, 24),
}


def function_group(function_id: int) -> str:
    """返回函数所属分组名。"""
    for name, members in FUNCTION_GROUPS.items():
        if function_id in members:
            return name
    raise ConfigurationError(f"function_id {function_id} outside 1..{NUM_FUNCTIONS}")


@dataclass(frozen=True)
class Bounds:
    """逐坐标的搜索区间。"""
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def box(cls, dimension: int, bound: float = DEFAULT_BOUND) -> "Bounds":
        return cls(lower=np.full(dimension, -bound), upper=np.full(dimension, bound))

    @property
    def centre(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class ProblemInstance:
    """一个带实例变换的测试函数实例。构造后不可变。"""
    function_id: int
    dimension: int
    instance_id: int
    shift: np.ndarray
    rotation: np.ndarray
    rotation_q: np.ndarray
    f_opt: float
    bounds: Bounds
    # Gallagher 峰值等函数专属的种子参数
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return FUNCTIONS[self.function_id][0]

    @property
    def key(self) -> Tuple[int, int, int]:
        return self.function_id, self.dimension, self.instance_id


# ---------------------------------------------------------------------------
# 变换工具
# ---------------------------------------------------------------------------

def _ramp(d: int) -> np.ndarray:
    """i/(d-1), i = 0..d-1。"""
    return np.arange(d, dtype=np.float64) / (d - 1)


def _lambda(alpha: float, d: int) -> np.ndarray:
    """对角矩阵 Λ^α 的对角元。"""
    return np.power(alpha, 0.5 * _ramp(d))


def t_osz(x: np.ndarray) -> np.ndarray:
    """振荡变换 T_osz。"""
    ax = np.abs(x)
    x_hat = np.where(ax > 0, np.log(np.where(ax > 0, ax, 1.0)), 0.0)
    c1 = np.where(x > 0, 10.0, 5.5)
    c2 = np.where(x > 0, 7.9, 3.1)
    return np.sign(x) * np.exp(x_hat + 0.049 * (np.sin(c1 * x_hat) + np.sin(c2 * x_hat)))


def t_asy(x: np.ndarray, beta: float) -> np.ndarray:
    """非对称变换 T_asy^β（按行作用于 (n, d) 数组）。"""
    d = x.shape[-1]
    positive = x > 0
    safe = np.where(positive, x, 0.0)
    exponent = 1.0 + beta * _ramp(d) * np.sqrt(safe)
    return np.where(positive, np.power(safe, exponent), x)


def f_pen(x: np.ndarray) -> np.ndarray:
    """边界罚项 Σ max(0, |x|-5)²。"""
    return np.sum(np.square(np.maximum(0.0, np.abs(x) - DEFAULT_BOUND)), axis=-1)


def _rot(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """对 (n, d) 的每一行左乘 m；逐行求和顺序与批大小无关。"""
    return np.einsum("ij,nj->ni", m, x)


# ---------------------------------------------------------------------------
# 24 个函数，x 形状为 (n, d)，返回 (n,) 不含 f_opt 的原始值
# ---------------------------------------------------------------------------

def _sphere(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = x - inst.shift
    return np.sum(z * z, axis=1)


def _ellipsoid(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = t_osz(x - inst.shift)
    return np.sum(np.power(10.0, 6.0 * _ramp(inst.dimension)) * z * z, axis=1)


def _rastrigin_core(z: np.ndarray) -> np.ndarray:
    d = z.shape[1]
    return 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1)) + np.sum(z * z, axis=1)


def _rastrigin(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = _lambda(10.0, inst.dimension) * t_asy(t_osz(x - inst.shift), 0.2)
    return _rastrigin_core(z)


def _bueche_rastrigin(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    z = t_osz(x - inst.shift)
    base = np.power(10.0, 0.5 * _ramp(d))
    odd = (np.arange(d) % 2 == 0)
    s = np.where((z > 0) & odd, 10.0 * base, base)
    return _rastrigin_core(s * z) + 100.0 * f_pen(x)


def _linear_slope(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    x_opt = np.where(inst.shift >= 0, DEFAULT_BOUND, -DEFAULT_BOUND)
    z = np.where(x * x_opt < DEFAULT_BOUND ** 2, x, x_opt)
    s = np.sign(x_opt) * np.power(10.0, _ramp(inst.dimension))
    return np.sum(5.0 * np.abs(s) - s * z, axis=1)


def _attractive_sector(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = _rot(_lambda(10.0, inst.dimension) * _rot(x - inst.shift, inst.rotation), inst.rotation_q)
    s = np.where(z * inst.shift > 0, 100.0, 1.0)
    return np.power(t_osz(np.sum(np.square(s * z), axis=1)), 0.9)


def _step_ellipsoid(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    z_hat = _lambda(10.0, d) * _rot(x - inst.shift, inst.rotation)
    z_tilde = np.where(np.abs(z_hat) > 0.5, np.floor(0.5 + z_hat), np.floor(0.5 + 10.0 * z_hat) / 10.0)
    z = _rot(z_tilde, inst.rotation_q)
    body = np.sum(np.power(10.0, 2.0 * _ramp(d)) * z * z, axis=1)
    return 0.1 * np.maximum(np.abs(z_hat[:, 0]) / 1e4, body) + f_pen(x)


def _rosenbrock_core(z: np.ndarray) -> np.ndarray:
    a, b = z[:, :-1], z[:, 1:]
    return np.sum(100.0 * np.square(a * a - b) + np.square(a - 1.0), axis=1)


def _rosenbrock(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    c = max(1.0, np.sqrt(inst.dimension) / 8.0)
    return _rosenbrock_core(c * (x - inst.shift) + 1.0)


def _rosenbrock_rotated(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    c = max(1.0, np.sqrt(inst.dimension) / 8.0)
    return _rosenbrock_core(c * _rot(x - inst.shift, inst.rotation) + 1.0)


def _ellipsoid_rotated(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = t_osz(_rot(x - inst.shift, inst.rotation))
    return np.sum(np.power(10.0, 6.0 * _ramp(inst.dimension)) * z * z, axis=1)


def _discus(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = t_osz(_rot(x - inst.shift, inst.rotation))
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def _bent_cigar(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = _rot(t_asy(_rot(x - inst.shift, inst.rotation), 0.5), inst.rotation)
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def _sharp_ridge(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = _rot(_lambda(10.0, inst.dimension) * _rot(x - inst.shift, inst.rotation), inst.rotation_q)
    return z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(z[:, 1:] ** 2, axis=1))


def _different_powers(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = _rot(x - inst.shift, inst.rotation)
    return np.sqrt(np.sum(np.power(np.abs(z), 2.0 + 4.0 * _ramp(inst.dimension)), axis=1))


def _rastrigin_rotated(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = t_asy(t_osz(_rot(x - inst.shift, inst.rotation)), 0.2)
    z = _rot(_lambda(10.0, inst.dimension) * _rot(z, inst.rotation_q), inst.rotation)
    return _rastrigin_core(z)


_WEIERSTRASS_K = np.arange(12)
_WEIERSTRASS_F0 = float(np.sum(0.5 ** _WEIERSTRASS_K * np.cos(np.pi * 3.0 ** _WEIERSTRASS_K)))


def _weierstrass(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    z = t_osz(_rot(x - inst.shift, inst.rotation))
    z = _rot(_lambda(0.01, d) * _rot(z, inst.rotation_q), inst.rotation)
    terms = 0.5 ** _WEIERSTRASS_K * np.cos(2 * np.pi * 3.0 ** _WEIERSTRASS_K * (z[..., None] + 0.5))
    inner = np.sum(terms, axis=(1, 2)) / d
    return 10.0 * (inner - _WEIERSTRASS_F0) ** 3 + 10.0 / d * f_pen(x)


def _schaffers(inst: ProblemInstance, x: np.ndarray, conditioning: float) -> np.ndarray:
    d = inst.dimension
    z = t_asy(_rot(x - inst.shift, inst.rotation), 0.5)
    z = _lambda(conditioning, d) * _rot(z, inst.rotation_q)
    s = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    root = np.sqrt(s)
    body = np.sum(root + root * np.sin(50.0 * np.power(s, 0.2)) ** 2, axis=1) / (d - 1)
    return body ** 2 + 10.0 * f_pen(x)


def _schaffers_f7(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return _schaffers(inst, x, 10.0)


def _schaffers_f7_ill(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return _schaffers(inst, x, 1000.0)


def _griewank_rosenbrock(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    c = max(1.0, np.sqrt(d) / 8.0)
    z = c * _rot(x - inst.shift, inst.rotation) + 1.0
    a, b = z[:, :-1], z[:, 1:]
    s = 100.0 * np.square(a * a - b) + np.square(a - 1.0)
    return 10.0 * np.sum(s / 4000.0 - np.cos(s), axis=1) / (d - 1) + 10.0


def _schwefel(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    signs = np.where(inst.shift >= 0, 1.0, -1.0)
    x_opt = 4.2096874633 * signs / 2.0
    x_hat = 2.0 * signs * x
    z_hat = x_hat.copy()
    z_hat[:, 1:] += 0.25 * (x_hat[:, :-1] - 2.0 * np.abs(x_opt[:-1]))
    z = 100.0 * (_lambda(10.0, d) * (z_hat - 2.0 * np.abs(x_opt)) + 2.0 * np.abs(x_opt))
    body = -np.sum(z * np.sin(np.sqrt(np.abs(z))), axis=1) / (100.0 * d) + 4.189828872724339
    return body + 100.0 * f_pen(z / 100.0)


def _gallagher(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    peaks = inst.extras["peaks"]          # (m, d)
    weights = inst.extras["weights"]      # (m,)
    diagonals = inst.extras["diagonals"]  # (m, d)
    diff = x[:, None, :] - peaks[None, :, :]
    rotated = np.einsum("ij,nmj->nmi", inst.rotation, diff)
    quad = np.sum(rotated * rotated * diagonals[None, :, :], axis=2)
    best = np.max(weights[None, :] * np.exp(-quad / (2.0 * d)), axis=1)
    return np.square(t_osz(10.0 - best)) + f_pen(x)


def _katsuura(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    z = _rot(_lambda(100.0, d) * _rot(x - inst.shift, inst.rotation), inst.rotation_q)
    powers = 2.0 ** np.arange(1, 33)
    scaled = z[..., None] * powers
    inner = np.sum(np.abs(scaled - np.round(scaled)) / powers, axis=2)
    prod = np.prod(np.power(1.0 + np.arange(1, d + 1) * inner, 10.0 / d ** 1.2), axis=1)
    return 10.0 / d ** 2 * prod - 10.0 / d ** 2 + f_pen(x)


def _lunacek(inst: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = inst.dimension
    mu0 = 2.5
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((mu0 ** 2 - 1.0) / s)
    signs = np.where(inst.shift >= 0, 1.0, -1.0)
    x_hat = 2.0 * signs * x
    z = _rot(_lambda(100.0, d) * _rot(x_hat - mu0, inst.rotation), inst.rotation_q)
    s1 = np.sum(np.square(x_hat - mu0), axis=1)
    s2 = np.sum(np.square(x_hat - mu1), axis=1)
    s3 = np.sum(np.cos(2 * np.pi * z), axis=1)
    return np.minimum(s1, d + s * s2) + 10.0 * (d - s3) + 1e4 * f_pen(x)


Objective = Callable[[ProblemInstance, np.ndarray], np.ndarray]

# id -> (名称, 实现, 是否无旋转)
FUNCTIONS: Dict[int, Tuple[str, Objective, bool]] = {
    1: ("sphere", _sphere, True),
    2: ("ellipsoid", _ellipsoid, True),
    3: ("rastrigin", _rastrigin, True),
    4: ("bueche_rastrigin", _bueche_rastrigin, True),
    5: ("linear_slope", _linear_slope, True),
    6: ("attractive_sector", _attractive_sector, False),
    7: ("step_ellipsoid", _step_ellipsoid, False),
    8: ("rosenbrock", _rosenbrock, False),
    9: ("rosenbrock_rotated", _rosenbrock_rotated, False),
    10: ("ellipsoid_rotated", _ellipsoid_rotated, False),
    11: ("discus", _discus, False),
    12: ("bent_cigar", _bent_cigar, False),
    13: ("sharp_ridge", _sharp_ridge, False),
    14: ("different_powers", _different_powers, False),
    15: ("rastrigin_rotated", _rastrigin_rotated, False),
    16: ("weierstrass", _weierstrass, False),
    17: ("schaffers_f7", _schaffers_f7, False),
    18: ("schaffers_f7_ill", _schaffers_f7_ill, False),
    19: ("griewank_rosenbrock", _griewank_rosenbrock, False),
    20: ("schwefel", _schwefel, False),
    21: ("gallagher_101", _gallagher, False),
    22: ("gallagher_21", _gallagher, False),
    23: ("katsuura", _katsuura, False),
    24: ("lunacek", _lunacek, False),
}


def _gallagher_extras(function_id: int, dimension: int, shift: np.ndarray,
                      rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Gallagher 峰：第 0 个峰位于 shift，其余峰在边界盒内均匀抽取。"""
    num_peaks, top_alpha, spread = (101, 1000.0, 5.0) if function_id == 21 else (21, 1000.0 ** 2, 4.9)
    weights = np.empty(num_peaks)
    weights[0] = 10.0
    weights[1:] = 1.1 + 8.0 * np.arange(num_peaks - 1) / (num_peaks - 2)
    alphas = np.empty(num_peaks)
    alphas[0] = top_alpha
    alphas[1:] = rng.permutation(np.power(1000.0, 2.0 * np.arange(num_peaks - 1) / (num_peaks - 2)))
    diagonals = np.empty((num_peaks, dimension))
    for i, alpha in enumerate(alphas):
        diagonals[i] = rng.permutation(_lambda(alpha, dimension) ** 2) / alpha ** 0.25
    peaks = rng.uniform(-spread, spread, size=(num_peaks, dimension))
    peaks[0] = shift
    return {"peaks": peaks, "weights": weights, "diagonals": diagonals}


def make_instance(function_id: int, dimension: int, instance_id: int,
                  bound: float = DEFAULT_BOUND) -> ProblemInstance:
    """构造 (f, d, i) 实例；相同参数得到逐位相同的实例。"""
    if function_id not in FUNCTIONS:
        raise ConfigurationError(f"function_id must be in 1..{NUM_FUNCTIONS}, got {function_id}")
    if dimension < 2:
        raise ConfigurationError(f"dimension must be >= 2, got {dimension}")
    if instance_id < 1:
        raise ConfigurationError(f"instance_id must be >= 1, got {instance_id}")

    rng = make_rng(function_id, dimension, instance_id)
    bounds = Bounds.box(dimension, bound)
    half = 0.5 * SHIFT_FRACTION * bounds.width
    shift = rng.uniform(bounds.centre - half, bounds.centre + half)
    f_opt = float(rng.uniform(-F_OPT_RANGE, F_OPT_RANGE))

    _, _, rotation_free = FUNCTIONS[function_id]
    if rotation_free:
        rotation = np.eye(dimension)
        rotation_q = np.eye(dimension)
    else:
        rotation = random_orthonormal(dimension, dimension, rng)
        rotation_q = random_orthonormal(dimension, dimension, rng)

    extras: Dict[str, np.ndarray] = {}
    if function_id in (21, 22):
        extras = _gallagher_extras(function_id, dimension, shift, rng)

    logger.debug(f"Created instance f{function_id} d={dimension} i={instance_id}")
    return ProblemInstance(function_id=function_id, dimension=dimension, instance_id=instance_id,
                           shift=shift, rotation=rotation, rotation_q=rotation_q, f_opt=f_opt,
                           bounds=bounds, extras=extras)


def evaluate_batch(instance: ProblemInstance, points: np.ndarray) -> np.ndarray:
    """对 (n, d) 点集求值，返回 (n,)。超出边界的点照常求值。"""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != instance.dimension:
        raise InputError(f"expected points of shape (n, {instance.dimension}), got {pts.shape}")
    _, objective, _ = FUNCTIONS[instance.function_id]
    return objective(instance, pts) + instance.f_opt


def evaluate(instance: ProblemInstance, point: Sequence[float]) -> float:
    """对单个点求值。"""
    pt = np.asarray(point, dtype=np.float64)
    if pt.ndim != 1 or pt.shape[0] != instance.dimension:
        raise InputError(f"point has length {pt.shape}, instance dimension is {instance.dimension}")
    return float(evaluate_batch(instance, pt[None, :])[0])


def to_physical(point_in_unit_cube: np.ndarray, bounds: Bounds) -> np.ndarray:
    """单位立方体 -> 物理域的逐坐标仿射映射；支持 (d,) 或 (n, d)。"""
    u = np.asarray(point_in_unit_cube, dtype=np.float64)
    return bounds.lower + u * bounds.width


def optimum_location(instance: ProblemInstance) -> Optional[np.ndarray]:
    """已知最优点位置；对最优点不在 shift 处的函数给出其实际位置。"""
    fid = instance.function_id
    signs = np.where(instance.shift >= 0, 1.0, -1.0)
    if fid == 5:
        return DEFAULT_BOUND * signs
    if fid == 20:
        return 4.2096874633 * signs / 2.0
    if fid == 24:
        return 2.5 * signs / 2.0
    return instance.shift.copy()

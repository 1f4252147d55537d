"""
GeoPAS 网络：共享切片编码器、侧统计量条件化、切片集合注意力聚合、维度嵌入与两个预测头。

所有前向函数返回 (输出, cache)，对应的反向函数用 cache 计算梯度。批量输入的形状约定：

    values, masks : (B, k, r, r)
    side          : (B, k, 3)     ξ = (log ℓ, log(Δ+1e-6), log(q+1e-6))
    log_dim       : (B, 1)
"""

from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..nn import primitives as P
from ..probing.slicer import SliceSet
from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError, ShapeError
from ...utils.seeding import make_rng

logger = get_logger(__name__)

Params = Dict[str, np.ndarray]

CONV_WIDTHS = (32, 64, 128)
VISUAL_WIDTH = CONV_WIDTHS[-1]
SIDE_WIDTH = 16
DIMENSION_WIDTH = 1
HEAD_WIDTH = 128
SIDE_EPS = 1e-6
# 池化发生在前两个卷积块之后
POOLED_BLOCKS = 2
INIT_STREAM = 11


@dataclass(frozen=True)
class ModelSpec:
    """决定参数形状的结构选项。"""
    num_algorithms: int
    resolution: int = 8
    k: Optional[int] = None
    dropout_rate: float = 0.2
    disable_side: bool = False
    disable_dimension: bool = False
    disable_catastrophe: bool = False

    def __post_init__(self):
        if self.num_algorithms < 2:
            raise ConfigurationError(f"portfolio needs at least 2 algorithms, got {self.num_algorithms}")
        check_resolution(self.resolution)

    @property
    def slice_width(self) -> int:
        return VISUAL_WIDTH + (0 if self.disable_side else SIDE_WIDTH)

    @property
    def representation_width(self) -> int:
        return self.slice_width + (0 if self.disable_dimension else DIMENSION_WIDTH)


def check_resolution(resolution: int):
    if resolution < 4 or resolution % 4:
        raise ConfigurationError(f"resolution must be a positive multiple of 4, got {resolution}")


def parameter_shapes(spec: ModelSpec) -> Dict[str, Tuple[int, ...]]:
    """按固定顺序列出所有可训练张量的形状。"""
    shapes: Dict[str, Tuple[int, ...]] = {}
    c_in = 1
    for block, width in enumerate(CONV_WIDTHS, start=1):
        for part in ("a", "b"):
            shapes[f"conv{block}{part}.w"] = (width, c_in, 3, 3)
            shapes[f"conv{block}{part}.b"] = (width,)
            c_in = width
    shapes["spatial_scorer.w"] = (1, VISUAL_WIDTH)
    shapes["spatial_scorer.b"] = (1,)
    if not spec.disable_side:
        shapes["side_embed.w"] = (SIDE_WIDTH, 3)
        shapes["side_embed.b"] = (SIDE_WIDTH,)
    shapes["slice_scorer.w"] = (1, spec.slice_width)
    shapes["slice_scorer.b"] = (1,)
    if not spec.disable_dimension:
        shapes["dim_embed.w"] = (DIMENSION_WIDTH, 1)
        shapes["dim_embed.b"] = (DIMENSION_WIDTH,)
    heads = ["reg"] if spec.disable_catastrophe else ["reg", "cat"]
    for head in heads:
        shapes[f"{head}.hidden.w"] = (HEAD_WIDTH, spec.representation_width)
        shapes[f"{head}.hidden.b"] = (HEAD_WIDTH,)
        shapes[f"{head}.out.w"] = (spec.num_algorithms, HEAD_WIDTH)
        shapes[f"{head}.out.b"] = (spec.num_algorithms,)
    return shapes


def _fan_in(name: str, shape: Tuple[int, ...], shapes: Dict[str, Tuple[int, ...]]) -> int:
    weight_shape = shapes[name[:-1] + "w"] if name.endswith(".b") else shape
    return int(np.prod(weight_shape[1:]))


def init_parameters(num_algorithms: int, seed: int, spec: Optional[ModelSpec] = None) -> Params:
    """按扇入缩放的均匀初始化：w, b ~ U(-1/√fan_in, 1/√fan_in)。"""
    spec = spec or ModelSpec(num_algorithms=num_algorithms)
    if spec.num_algorithms != num_algorithms:
        raise ConfigurationError("num_algorithms disagrees with the model spec")
    rng = make_rng(seed, INIT_STREAM)
    shapes = parameter_shapes(spec)
    params: Params = {}
    for name, shape in shapes.items():
        bound = 1.0 / np.sqrt(_fan_in(name, shape, shapes))
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def parameter_count(params: Params) -> int:
    return int(sum(p.size for p in params.values()))


# ---------------------------------------------------------------------------
# 输入打包
# ---------------------------------------------------------------------------

def side_features(scale: float, value_range: float, iqr: float) -> np.ndarray:
    """ξ = (log ℓ, log(Δ + ε), log(q + ε))，ε = 1e-6。"""
    return np.array([np.log(scale), np.log(value_range + SIDE_EPS), np.log(iqr + SIDE_EPS)])


@dataclass
class Batch:
    values: np.ndarray
    masks: np.ndarray
    side: np.ndarray
    log_dim: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def take(self, index: np.ndarray) -> "Batch":
        return Batch(self.values[index], self.masks[index], self.side[index], self.log_dim[index])


def pack_slice_sets(slice_sets: Sequence[SliceSet]) -> Batch:
    """把若干 SliceSet 打包成批量数组；所有集合必须有相同的 k 与 r。"""
    if not slice_sets:
        raise ConfigurationError("cannot pack an empty list of slice sets")
    ks = {s.k for s in slice_sets}
    rs = {s.resolution for s in slice_sets}
    if len(ks) != 1 or len(rs) != 1:
        raise ShapeError(f"slice sets disagree on k or r: k={sorted(ks)}, r={sorted(rs)}")
    values = np.stack([[sl.values for sl in s.slices] for s in slice_sets]).astype(np.float64)
    masks = np.stack([[sl.mask for sl in s.slices] for s in slice_sets]).astype(np.float64)
    side = np.stack([[side_features(sl.scale, sl.value_range, sl.iqr) for sl in s.slices]
                     for s in slice_sets])
    log_dim = np.log(np.array([[float(s.dimension)] for s in slice_sets]))
    return Batch(values=values, masks=masks, side=side, log_dim=log_dim)


# ---------------------------------------------------------------------------
# 网络
# ---------------------------------------------------------------------------

class GeoPASNetwork:
    """持有参数并提供分阶段的前向/反向计算。"""

    def __init__(self, spec: ModelSpec, params: Params):
        expected = parameter_shapes(spec)
        missing = set(expected) - set(params)
        if missing:
            raise ConfigurationError(f"parameters missing for {sorted(missing)}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(f"{name} has shape {params[name].shape}, expected {shape}")
        self.spec = spec
        self.params = params

    # -- 切片编码 ----------------------------------------------------------

    def encode_forward(self, values: np.ndarray, masks: np.ndarray) -> Tuple[np.ndarray, dict]:
        """values, masks: (N, r, r) -> z: (N, 128)。"""
        if values.shape[-1] % 4 or values.shape[-2] % 4:
            raise ConfigurationError(f"resolution must be divisible by 4, got {values.shape[-2:]}")
        h = values[:, None, :, :]
        mask = masks
        caches: List[tuple] = []
        for block in range(1, len(CONV_WIDTHS) + 1):
            for part in ("a", "b"):
                h, conv_cache = P.conv2d_forward(h, self.params[f"conv{block}{part}.w"],
                                                 self.params[f"conv{block}{part}.b"])
                h, relu_cache = P.relu_forward(h)
                caches.append(("conv", f"conv{block}{part}", conv_cache, relu_cache))
            if block <= POOLED_BLOCKS:
                h, pool_cache = P.maxpool2x2_forward(h)
                mask = P.pool_mask(mask)
                caches.append(("pool", None, pool_cache, None))

        w = self.params["spatial_scorer.w"][0]
        scores = np.einsum("nchw,c->nhw", h, w) + self.params["spatial_scorer.b"][0]
        z, att_cache = P.masked_softmax_sum_forward(scores, h, mask)
        cache = {"layers": caches, "features": h, "attention": att_cache, "coarse_mask": mask}
        return z, cache

    def encode_backward(self, dz: np.ndarray, cache: dict, grads: Params):
        dscores, dh = P.masked_softmax_sum_backward(dz, cache["attention"])
        w = self.params["spatial_scorer.w"][0]
        h = cache["features"]
        dh = dh + np.einsum("nhw,c->nchw", dscores, w)
        _accumulate(grads, "spatial_scorer.w", np.einsum("nhw,nchw->c", dscores, h)[None, :])
        _accumulate(grads, "spatial_scorer.b", np.array([dscores.sum()]))
        for kind, name, layer_cache, relu_cache in reversed(cache["layers"]):
            if kind == "pool":
                dh = P.maxpool2x2_backward(dh, layer_cache)
            else:
                dh = P.relu_backward(dh, relu_cache)
                dh, dw, db = P.conv2d_backward(dh, layer_cache)
                _accumulate(grads, f"{name}.w", dw)
                _accumulate(grads, f"{name}.b", db)

    def encode_slice(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """单个切片 (r, r) -> z (128,)。"""
        check_resolution(values.shape[0])
        z, _ = self.encode_forward(np.asarray(values, dtype=np.float64)[None],
                                   np.asarray(mask, dtype=np.float64)[None])
        return z[0]

    # -- 条件化与聚合 ------------------------------------------------------

    def condition_forward(self, z: np.ndarray, side: np.ndarray) -> Tuple[np.ndarray, Optional[tuple]]:
        """z: (..., 128)，side: (..., 3) -> z̃: (..., slice_width)。"""
        if self.spec.disable_side:
            return z, None
        emb, cache = P.linear_forward(side, self.params["side_embed.w"], self.params["side_embed.b"])
        return np.concatenate([z, emb], axis=-1), cache

    def condition_backward(self, dz_tilde: np.ndarray, cache: Optional[tuple], grads: Params) -> np.ndarray:
        if cache is None:
            return dz_tilde
        _, dw, db = P.linear_backward(dz_tilde[..., VISUAL_WIDTH:], cache)
        _accumulate(grads, "side_embed.w", dw)
        _accumulate(grads, "side_embed.b", db)
        return dz_tilde[..., :VISUAL_WIDTH]

    def condition_slice(self, z: np.ndarray, scale: float, value_range: float, iqr: float) -> np.ndarray:
        z_tilde, _ = self.condition_forward(np.asarray(z, dtype=np.float64),
                                            side_features(scale, value_range, iqr))
        return z_tilde

    def aggregate_forward(self, z_tilde: np.ndarray, log_dim: np.ndarray) -> Tuple[np.ndarray, dict]:
        """z_tilde: (B, k, W), log_dim: (B, 1) -> Z: (B, representation_width)。"""
        w = self.params["slice_scorer.w"][0]
        logits = z_tilde @ w + self.params["slice_scorer.b"][0]
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        beta = e / e.sum(axis=1, keepdims=True)
        pooled = np.einsum("bk,bkw->bw", beta, z_tilde)
        cache = {"z_tilde": z_tilde, "beta": beta, "dim": None}
        if self.spec.disable_dimension:
            return pooled, cache
        emb, dim_cache = P.linear_forward(log_dim, self.params["dim_embed.w"], self.params["dim_embed.b"])
        cache["dim"] = dim_cache
        return np.concatenate([pooled, emb], axis=-1), cache

    def aggregate_backward(self, dZ: np.ndarray, cache: dict, grads: Params) -> np.ndarray:
        z_tilde, beta = cache["z_tilde"], cache["beta"]
        width = z_tilde.shape[-1]
        dpooled = dZ[:, :width]
        if cache["dim"] is not None:
            _, dw, db = P.linear_backward(dZ[:, width:], cache["dim"])
            _accumulate(grads, "dim_embed.w", dw)
            _accumulate(grads, "dim_embed.b", db)
        dbeta = np.einsum("bw,bkw->bk", dpooled, z_tilde)
        dlogits = beta * (dbeta - np.sum(beta * dbeta, axis=1, keepdims=True))
        w = self.params["slice_scorer.w"][0]
        _accumulate(grads, "slice_scorer.w", np.einsum("bk,bkw->w", dlogits, z_tilde)[None, :])
        _accumulate(grads, "slice_scorer.b", np.array([dlogits.sum()]))
        return beta[..., None] * dpooled[:, None, :] + dlogits[..., None] * w

    def aggregate(self, conditioned: Sequence[np.ndarray], dimension: int) -> np.ndarray:
        """k 个条件化切片嵌入 + 维度 d -> Z。"""
        if len(conditioned) < 1:
            raise ConfigurationError("aggregate needs at least one slice")
        stacked = np.stack([np.asarray(c, dtype=np.float64) for c in conditioned])[None]
        Z, _ = self.aggregate_forward(stacked, np.array([[np.log(float(dimension))]]))
        return Z[0]

    # -- 预测头 ------------------------------------------------------------

    def _head_forward(self, head: str, Z: np.ndarray) -> Tuple[np.ndarray, tuple]:
        hidden, c1 = P.linear_forward(Z, self.params[f"{head}.hidden.w"], self.params[f"{head}.hidden.b"])
        act, c2 = P.relu_forward(hidden)
        out, c3 = P.linear_forward(act, self.params[f"{head}.out.w"], self.params[f"{head}.out.b"])
        return out, (c1, c2, c3)

    def _head_backward(self, head: str, dout: np.ndarray, cache: tuple, grads: Params) -> np.ndarray:
        c1, c2, c3 = cache
        dact, dw, db = P.linear_backward(dout, c3)
        _accumulate(grads, f"{head}.out.w", dw)
        _accumulate(grads, f"{head}.out.b", db)
        dhidden = P.relu_backward(dact, c2)
        dZ, dw, db = P.linear_backward(dhidden, c1)
        _accumulate(grads, f"{head}.hidden.w", dw)
        _accumulate(grads, f"{head}.hidden.b", db)
        return dZ

    def heads_forward(self, Z: np.ndarray, train: bool = False,
                      rng: Optional[np.random.Generator] = None
                      ) -> Tuple[np.ndarray, Optional[np.ndarray], dict]:
        dropped, drop_scale = P.dropout_forward(Z, self.spec.dropout_rate, train, rng)
        y_reg, reg_cache = self._head_forward("reg", dropped)
        cache = {"dropout": drop_scale, "reg": reg_cache, "cat": None}
        if self.spec.disable_catastrophe:
            return y_reg, None, cache
        y_cat, cat_cache = self._head_forward("cat", dropped)
        cache["cat"] = cat_cache
        return y_reg, y_cat, cache

    def heads_backward(self, dy_reg: np.ndarray, dy_cat: Optional[np.ndarray], cache: dict,
                       grads: Params) -> np.ndarray:
        dZ = self._head_backward("reg", dy_reg, cache["reg"], grads)
        if cache["cat"] is not None and dy_cat is not None:
            dZ = dZ + self._head_backward("cat", dy_cat, cache["cat"], grads)
        return P.dropout_backward(dZ, cache["dropout"])

    def predict(self, Z: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """推理：dropout 关闭。catastrophe 头被消融时第二个输出为 None。"""
        y_reg, y_cat, _ = self.heads_forward(np.asarray(Z, dtype=np.float64)[None], train=False)
        return y_reg[0], (None if y_cat is None else y_cat[0])

    # -- 完整前向 / 反向 ---------------------------------------------------

    def forward(self, batch: Batch, train: bool = False,
                rng: Optional[np.random.Generator] = None
                ) -> Tuple[np.ndarray, Optional[np.ndarray], dict]:
        b, k, r, _ = batch.values.shape
        z, enc_cache = self.encode_forward(batch.values.reshape(b * k, r, r),
                                           batch.masks.reshape(b * k, r, r))
        z_tilde, cond_cache = self.condition_forward(z.reshape(b, k, VISUAL_WIDTH), batch.side)
        Z, agg_cache = self.aggregate_forward(z_tilde, batch.log_dim)
        y_reg, y_cat, head_cache = self.heads_forward(Z, train, rng)
        cache = {"enc": enc_cache, "cond": cond_cache, "agg": agg_cache, "heads": head_cache,
                 "shape": (b, k)}
        return y_reg, y_cat, cache

    def backward(self, dy_reg: np.ndarray, dy_cat: Optional[np.ndarray], cache: dict) -> Params:
        grads: Params = {name: np.zeros_like(value) for name, value in self.params.items()}
        b, k = cache["shape"]
        dZ = self.heads_backward(dy_reg, dy_cat, cache["heads"], grads)
        dz_tilde = self.aggregate_backward(dZ, cache["agg"], grads)
        dz = self.condition_backward(dz_tilde, cache["cond"], grads)
        self.encode_backward(dz.reshape(b * k, VISUAL_WIDTH), cache["enc"], grads)
        return grads

    def representation(self, batch: Batch) -> np.ndarray:
        """返回每个数据点的 Z（推理模式）。"""
        b, k, r, _ = batch.values.shape
        z, _ = self.encode_forward(batch.values.reshape(b * k, r, r), batch.masks.reshape(b * k, r, r))
        z_tilde, _ = self.condition_forward(z.reshape(b, k, VISUAL_WIDTH), batch.side)
        Z, _ = self.aggregate_forward(z_tilde, batch.log_dim)
        return Z

    def manifest(self) -> dict:
        """模型清单：|A|、r、k、消融开关与参数量。"""
        data = asdict(self.spec)
        data["parameter_count"] = parameter_count(self.params)
        data["representation_width"] = self.spec.representation_width
        return data


def _accumulate(grads: Params, name: str, value: np.ndarray):
    grads[name] += value



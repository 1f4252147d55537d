"""
可微基元：每个基元由 *_forward / *_backward 成对组成。

forward 返回 (输出, cache)，backward 接收上游梯度与 cache，返回对各输入的梯度。
张量就是 float64 的 numpy 数组；卷积、池化和注意力都接受可选的前导批维。
"""

from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ...utils.exceptions import ShapeError

Tensor = np.ndarray

KERNEL = 3
PADDING = 1
# 注意力分母中的稳定项
ATTENTION_EPS = 1e-8


def as_tensor(x) -> Tensor:
    return np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# conv2d: 3×3，零填充 1，步长 1
# ---------------------------------------------------------------------------

def conv2d_forward(x: Tensor, kernels: Tensor, bias: Tensor) -> Tuple[Tensor, tuple]:
    """x: (N, C_in, H, W) 或 (C_in, H, W)；kernels: (C_out, C_in, 3, 3)；bias: (C_out,)。"""
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects a 3-D or 4-D input, got shape {x.shape}")
    c_out, c_in, kh, kw = kernels.shape
    if (kh, kw) != (KERNEL, KERNEL):
        raise ShapeError(f"conv2d kernels must be 3x3, got {kh}x{kw}")
    if x.shape[1] != c_in:
        raise ShapeError(f"conv2d channel mismatch: input has {x.shape[1]}, kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv2d bias must have shape ({c_out},), got {bias.shape}")

    padded = np.pad(x, ((0, 0), (0, 0), (PADDING, PADDING), (PADDING, PADDING)))
    # (N, C_in, H, W, 3, 3)
    patches = sliding_window_view(padded, (KERNEL, KERNEL), axis=(2, 3))
    out = np.einsum("nchwij,ocij->nohw", patches, kernels, optimize=True) + bias[None, :, None, None]
    cache = (patches, kernels, x.shape, squeeze)
    return (out[0] if squeeze else out), cache


def conv2d_backward(dout: Tensor, cache: tuple) -> Tuple[Tensor, Tensor, Tensor]:
    """返回 (dx, dkernels, dbias)。"""
    patches, kernels, x_shape, squeeze = cache
    if squeeze:
        dout = dout[None]
    _, _, h, w = x_shape
    dkernels = np.einsum("nohw,nchwij->ocij", dout, patches, optimize=True)
    dbias = dout.sum(axis=(0, 2, 3))
    dpatches = np.einsum("nohw,ocij->nchwij", dout, kernels, optimize=True)
    dpadded = np.zeros((x_shape[0], x_shape[1], h + 2 * PADDING, w + 2 * PADDING))
    for i in range(KERNEL):
        for j in range(KERNEL):
            dpadded[:, :, i:i + h, j:j + w] += dpatches[..., i, j]
    dx = dpadded[:, :, PADDING:PADDING + h, PADDING:PADDING + w]
    return (dx[0] if squeeze else dx), dkernels, dbias


# ---------------------------------------------------------------------------
# 2×2 最大池化，步长 2；同样用于掩码传播
# ---------------------------------------------------------------------------

def _windows(x: Tensor) -> Tensor:
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial extents, got {h}x{w}")
    lead = x.shape[:-2]
    grouped = x.reshape(*lead, h // 2, 2, w // 2, 2)
    # 窗口内按行优先顺序 (0,0) (0,1) (1,0) (1,1)
    return np.moveaxis(grouped, -3, -2).reshape(*lead, h // 2, w // 2, 4)


def maxpool2x2_forward(x: Tensor) -> Tuple[Tensor, tuple]:
    windows = _windows(x)
    # argmax 取首个最大值，平局时梯度流向窗口内第一个位置
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return out, (argmax, x.shape)


def maxpool2x2_backward(dout: Tensor, cache: tuple) -> Tensor:
    argmax, x_shape = cache
    h, w = x_shape[-2:]
    lead = x_shape[:-2]
    dwindows = np.zeros((*lead, h // 2, w // 2, 4))
    np.put_along_axis(dwindows, argmax[..., None], dout[..., None], axis=-1)
    grouped = np.moveaxis(dwindows.reshape(*lead, h // 2, w // 2, 2, 2), -2, -3)
    return grouped.reshape(x_shape)


def pool_mask(mask: Tensor) -> Tensor:
    """掩码池化：任一细格有效则粗格有效。"""
    return _windows(np.asarray(mask)).max(axis=-1)


# ---------------------------------------------------------------------------
# 掩码 softmax 加权求和（空间注意力池化）
# ---------------------------------------------------------------------------

def masked_softmax_sum_forward(scores: Tensor, features: Tensor, mask: Tensor,
                               eps: float = ATTENTION_EPS) -> Tuple[Tensor, tuple]:
    """scores: (..., H, W)，features: (..., C, H, W)，mask: (..., H, W)。返回 (..., C)。

    α = M·exp(s - m) / (Σ M·exp(s - m) + ε)，m 为有效格上的最大分数，
    因此分母 ≥ 1，ε 相对于最大项起作用：权重之和为 Σe^{s-m} / (Σe^{s-m} + ε)，
    而不是未平移时的 Σe^s / (Σe^s + ε)。没有任何有效格时退化为全格均匀平均。
    """
    if features.shape[:-3] != scores.shape[:-2] or features.shape[-2:] != scores.shape[-2:]:
        raise ShapeError(f"scores {scores.shape} do not match features {features.shape}")
    if mask.shape != scores.shape:
        raise ShapeError(f"mask {mask.shape} does not match scores {scores.shape}")

    lead = scores.shape[:-2]
    cells = scores.shape[-2] * scores.shape[-1]
    s = scores.reshape(*lead, cells)
    m = np.asarray(mask, dtype=bool).reshape(*lead, cells)
    f = features.reshape(*features.shape[:-2], cells)

    any_valid = m.any(axis=-1)
    top = np.where(m, s, -np.inf).max(axis=-1, keepdims=True)
    top = np.where(any_valid[..., None], top, 0.0)
    top_index = np.where(m, s, -np.inf).argmax(axis=-1)
    e = np.where(m, np.exp(np.where(m, s - top, 0.0)), 0.0)
    denom = e.sum(axis=-1, keepdims=True) + eps
    alpha = e / denom
    uniform = np.full_like(alpha, 1.0 / cells)
    alpha = np.where(any_valid[..., None], alpha, uniform)

    out = np.einsum("...cp,...p->...c", f, alpha)
    cache = (alpha, f, any_valid, top_index, eps / denom[..., 0], scores.shape, features.shape)
    return out, cache


def masked_softmax_sum_backward(dout: Tensor, cache: tuple) -> Tuple[Tensor, Tensor]:
    """返回 (dscores, dfeatures)；回退路径上分数梯度为零。"""
    alpha, f, any_valid, top_index, eps_share, s_shape, f_shape = cache
    dfeatures = np.einsum("...c,...p->...cp", dout, alpha).reshape(f_shape)
    dalpha = np.einsum("...c,...cp->...p", dout, f)
    weighted = np.sum(alpha * dalpha, axis=-1, keepdims=True)
    ds = alpha * (dalpha - weighted)
    # 最大分数通过 ε·e^m 项进入分母
    correction = np.zeros_like(ds)
    np.put_along_axis(correction, top_index[..., None], (eps_share[..., None] * weighted), axis=-1)
    ds = ds - correction
    ds = np.where(any_valid[..., None], ds, 0.0)
    return ds.reshape(s_shape), dfeatures


# ---------------------------------------------------------------------------
# 仿射、ReLU、dropout
# ---------------------------------------------------------------------------

def linear_forward(x: Tensor, weight: Tensor, bias: Tensor) -> Tuple[Tensor, tuple]:
    """x: (..., n)，weight: (m, n)，bias: (m,)。"""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input width {x.shape[-1]} != weight columns {weight.shape[1]}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias shape {bias.shape} != ({weight.shape[0]},)")
    return x @ weight.T + bias, (x, weight)


def linear_backward(dout: Tensor, cache: tuple) -> Tuple[Tensor, Tensor, Tensor]:
    x, weight = cache
    dx = dout @ weight
    flat_x = x.reshape(-1, x.shape[-1])
    flat_d = dout.reshape(-1, dout.shape[-1])
    return dx, flat_d.T @ flat_x, flat_d.sum(axis=0)


def relu_forward(x: Tensor) -> Tuple[Tensor, Tensor]:
    positive = x > 0
    return np.where(positive, x, 0.0), positive


def relu_backward(dout: Tensor, positive: Tensor) -> Tensor:
    return np.where(positive, dout, 0.0)


def dropout_forward(x: Tensor, p: float, train: bool,
                    rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Optional[Tensor]]:
    """inverted dropout；评估时为恒等映射。"""
    if not train or p <= 0.0:
        return x, None
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if rng is None:
        raise ValueError("dropout at train time needs a generator")
    scale = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * scale, scale


def dropout_backward(dout: Tensor, scale: Optional[Tensor]) -> Tensor:
    return dout if scale is None else dout * scale

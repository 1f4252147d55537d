"""
联合损失与训练循环。

    L = SmoothL1(ŷ_reg, target) + λ_cls · BCE(ŷ_cat, c)

target 默认为 log(relERT)；regression_target = "linear" 时直接回归 relERT。
每个 epoch 按种子打乱，按固定批大小切分，用 Adam 更新。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .network import Batch, GeoPASNetwork, ModelSpec, Params, init_parameters, pack_slice_sets
from ..nn.losses import bce_with_logits, smooth_l1
from ..nn.optim import OptimizerState, adam_step
from ..probing.slicer import SliceSet
from ...infrastructure.logger import get_logger
from ...utils.exceptions import ConfigurationError, InputError
from ...utils.seeding import make_rng

logger = get_logger(__name__)

REGRESSION_TARGETS = ("log", "linear")
TRAIN_STREAM = 21
DROPOUT_STREAM = 22


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    lambda_cls: float = 10.0
    seed: int = 0
    dropout: bool = True
    dropout_rate: float = 0.2
    disable_side: bool = False
    disable_dimension: bool = False
    disable_catastrophe: bool = False
    regression_target: str = "log"
    # 设置后在该步数处停止，优先于 epochs
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.lambda_cls < 0:
            raise ConfigurationError(f"lambda_cls must be >= 0, got {self.lambda_cls}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be positive")
        if self.regression_target not in REGRESSION_TARGETS:
            raise ConfigurationError(f"unknown regression target: {self.regression_target}")

    def model_spec(self, num_algorithms: int, resolution: int, k: Optional[int] = None) -> ModelSpec:
        return ModelSpec(num_algorithms=num_algorithms, resolution=resolution, k=k,
                         dropout_rate=self.dropout_rate if self.dropout else 0.0,
                         disable_side=self.disable_side, disable_dimension=self.disable_dimension,
                         disable_catastrophe=self.disable_catastrophe)


@dataclass
class TrainingExample:
    slice_set: SliceSet
    relert: np.ndarray
    catastrophe: np.ndarray


@dataclass
class TrainResult:
    network: GeoPASNetwork
    epoch_losses: List[float] = field(default_factory=list)
    step_losses: List[float] = field(default_factory=list)
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    rng: Optional[np.random.Generator] = None

    @property
    def params(self) -> Params:
        return self.network.params


def regression_targets(relert: np.ndarray, target: str = "log") -> np.ndarray:
    if target == "log":
        return np.log(relert)
    return np.asarray(relert, dtype=np.float64)


def joint_loss(y_reg: np.ndarray, y_cat: Optional[np.ndarray], targets: np.ndarray,
               catastrophe: np.ndarray, lambda_cls: float):
    """返回 (总损失, d/dy_reg, d/dy_cat)。catastrophe 头缺失时第三项为 None。"""
    reg_loss, d_reg = smooth_l1(y_reg, targets)
    if y_cat is None:
        return reg_loss, d_reg, None
    cat_loss, d_cat = bce_with_logits(y_cat, catastrophe)
    return reg_loss + lambda_cls * cat_loss, d_reg, lambda_cls * d_cat


def evaluate_loss(network: GeoPASNetwork, batch: Batch, targets: np.ndarray,
                  catastrophe: np.ndarray, lambda_cls: float) -> float:
    y_reg, y_cat, _ = network.forward(batch, train=False)
    loss, _, _ = joint_loss(y_reg, y_cat, targets, catastrophe, lambda_cls)
    return loss


def _stack_labels(dataset: Sequence[TrainingExample]):
    relert = np.stack([np.asarray(ex.relert, dtype=np.float64) for ex in dataset])
    catastrophe = np.stack([np.asarray(ex.catastrophe, dtype=np.float64) for ex in dataset])
    if relert.shape != catastrophe.shape:
        raise InputError(f"relERT rows {relert.shape} and catastrophe rows {catastrophe.shape} differ")
    if np.any(~np.isfinite(relert)) or np.any(relert < 1.0):
        raise InputError("training relERT labels must be capped and >= 1")
    return relert, catastrophe


def train(dataset: Sequence[TrainingExample], cfg: TrainConfig) -> TrainResult:
    """训练一个模型；相同种子得到逐位相同的参数。"""
    if not dataset:
        raise ConfigurationError("cannot train on an empty dataset")
    batch = pack_slice_sets([ex.slice_set for ex in dataset])
    relert, catastrophe = _stack_labels(dataset)
    targets = regression_targets(relert, cfg.regression_target)

    spec = cfg.model_spec(relert.shape[1], batch.values.shape[-1], batch.values.shape[1])
    network = GeoPASNetwork(spec, init_parameters(spec.num_algorithms, cfg.seed, spec))
    state = OptimizerState.for_params(network.params, learning_rate=cfg.learning_rate)
    order_rng = make_rng(cfg.seed, TRAIN_STREAM)
    dropout_rng = make_rng(cfg.seed, DROPOUT_STREAM)

    result = TrainResult(network=network, rng=dropout_rng)
    result.initial_loss = evaluate_loss(network, batch, targets, catastrophe, cfg.lambda_cls)
    logger.debug(f"Training on {batch.size} datapoints, {spec.num_algorithms} algorithms, "
                 f"initial loss {result.initial_loss:.4f}")

    steps = 0
    epoch = 0
    while True:
        order = order_rng.permutation(batch.size)
        losses = []
        for start in range(0, batch.size, cfg.batch_size):
            index = order[start:start + cfg.batch_size]
            y_reg, y_cat, cache = network.forward(batch.take(index), train=True, rng=dropout_rng)
            loss, d_reg, d_cat = joint_loss(y_reg, y_cat, targets[index], catastrophe[index],
                                            cfg.lambda_cls)
            grads = network.backward(d_reg, d_cat, cache)
            adam_step(network.params, grads, state)
            losses.append(loss)
            result.step_losses.append(loss)
            steps += 1
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                break
        result.epoch_losses.append(float(np.mean(losses)))
        epoch += 1
        logger.debug(f"Epoch {epoch}: mean loss {result.epoch_losses[-1]:.4f}")
        if cfg.max_steps is not None:
            if steps >= cfg.max_steps:
                break
        elif epoch >= cfg.epochs:
            break

    result.final_loss = evaluate_loss(network, batch, targets, catastrophe, cfg.lambda_cls)
    logger.info(f"Training finished after {steps} steps: loss {result.initial_loss:.4f} "
                f"-> {result.final_loss:.4f}")
    return result


def predict_batch(network: GeoPASNetwork, slice_sets: Sequence[SliceSet]):
    """对若干 SliceSet 推理，返回 (ŷ_reg, ŷ_cat 或 None)。"""
    y_reg, y_cat, _ = network.forward(pack_slice_sets(slice_sets), train=False)
    return y_reg, y_cat

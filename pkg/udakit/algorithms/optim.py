import numpy as np
from dataclasses import dataclass, field
from typing import Dict, Mapping, NamedTuple
from udakit.errors import ShapeError, TrainingError
from udakit.algorithms.config import OptimizerConfig
from udakit.models.bundle import ModelBundle
from udakit.ndgraph.tensor import Tensor


"""
带动量与权重衰减的SGD，以及指数衰减的学习率。
"""


def lr_at(lr0: float, p: float, gamma: float, decay: float) -> float:
    """
    学习率lr0·(1 + γp)^(-decay)。
    @params:
        lr0: float 初始学习率
        p: float 训练进度，位于[0, 1]
        gamma: float 衰减速度γ
        decay: float 衰减指数
    @return:
        lr: float 当前学习率
    """
    return lr0 * (1.0 + gamma * p) ** (-decay)


class TrainerSnapshot(NamedTuple):
    bundle: ModelBundle
    buffers: Dict[str, np.ndarray]
    step: int
    epoch: int


@dataclass
class TrainerState:
    bundle: ModelBundle
    optimizer: OptimizerConfig
    buffers: Dict[str, np.ndarray] = field(default_factory = dict)
    step: int = 0
    epoch: int = 0
    total_steps: int = 1
    rng: np.random.Generator = field(default_factory = lambda: np.random.default_rng(0))


    def __post_init__(self) -> None:
        """
        一个训练器的全部可变状态。
        @params:
            bundle: ModelBundle 模型参数
            optimizer: OptimizerConfig 优化器设定
            buffers: Dict[str, np.ndarray] 动量缓存，缺省时为全零
            step: int 已完成的步数
            epoch: int 当前轮数
            total_steps: int 训练总步数，用于计算训练进度
            rng: np.random.Generator 训练步内部使用的随机数生成器
        """
        for name, t in self.bundle.params.items():
            if name not in self.buffers:
                self.buffers[name] = np.zeros(t.shape)
            elif self.buffers[name].shape != t.shape:
                raise ShapeError("Momentum buffer of '%s' has shape %s, expected %s." % (name, self.buffers[name].shape, t.shape))


    @property
    def progress(self) -> float:
        return min(1.0, self.step / max(1, self.total_steps))


    def snapshot(self) -> TrainerSnapshot:
        """
        保存当前参数与动量缓存的副本。
        """
        return TrainerSnapshot(self.bundle.snapshot(), {k: v.copy() for k, v in self.buffers.items()}, self.step, self.epoch)


    def restore(self, snap: TrainerSnapshot) -> None:
        """
        回滚参数与动量缓存，步数、轮数与随机数状态保持不变。
        """
        self.bundle = snap.bundle.snapshot()
        self.buffers = {k: v.copy() for k, v in snap.buffers.items()}


def sgd_step(state: TrainerState, grads: Mapping[str, np.ndarray], lr: float) -> TrainerState:
    """
    一步SGD：v ← m·v + (g + wd·θ)，θ ← θ - lr·v。未出现在grads中的参数梯度视为零。
    先检查全部梯度，任一梯度非有限时不更新任何参数。
    @params:
        state: TrainerState 训练器状态
        grads: Mapping[str, np.ndarray] 参数名到梯度的映射
        lr: float 学习率
    @return:
        state: TrainerState 更新后的状态
    """
    params = state.bundle.params
    for name, g in grads.items():
        if name not in params:
            raise TrainingError("Gradient for unknown parameter '%s'." % (name,), name)
        if g.shape != params[name].shape:
            raise TrainingError("Gradient of '%s' has shape %s, expected %s." % (name, g.shape, params[name].shape), name)
        if not np.all(np.isfinite(g)):
            raise TrainingError("Non-finite gradient for parameter '%s'." % (name,), name)
    opt = state.optimizer
    updated = {}
    for name, t in params.items():
        theta = t.data
        g = grads[name] if name in grads else np.zeros(theta.shape)
        v = opt.momentum * state.buffers[name] + (g + opt.weight_decay * theta)
        state.buffers[name] = v
        updated[name] = Tensor.wrap(theta - lr * v)
    state.bundle.params = updated
    return state

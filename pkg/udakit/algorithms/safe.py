import logging
import numpy as np
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union
from udakit.errors import ConfigError
from udakit.algorithms.optim import TrainerSnapshot, TrainerState
from udakit.ndgraph.tensor import Tensor


"""
安全训练：按区间统计目标域预测的多样性，骤降时把模型恢复到上一个成功的快照，并重新开始r(t)的爬升。
"""


logger = logging.getLogger(__name__)


@dataclass
class SafeTrainingState:
    ramp_steps: int
    interval: int
    collapse_ratio: float = 0.5
    t_r: int = 0
    snapshot: Optional[TrainerSnapshot] = None
    initial: Optional[TrainerSnapshot] = None
    history: List[float] = field(default_factory = list)
    restores: int = 0
    div_sum: float = 0.0
    div_count: int = 0


    def __post_init__(self) -> None:
        """
        @params:
            ramp_steps: int r从0升到1所需的步数T_r
            interval: int 区间长度T
            collapse_ratio: float 区间平均多样性低于δ·历史最大值时判定为崩溃
            t_r: int 本轮爬升的起点
            snapshot: TrainerSnapshot 最近一次成功区间结束时的快照
            initial: TrainerSnapshot 第0步的快照
            history: List[float] 被接受的区间平均多样性
        """
        if self.ramp_steps < 1 or self.interval < 1:
            raise ConfigError("Ramp length and interval must be at least 1 step.")
        if not 0.0 < self.collapse_ratio < 1.0:
            raise ConfigError("The collapse ratio must lie in (0, 1), got %r." % (self.collapse_ratio,))


def init_safe_training(trainer: TrainerState, interval: int, ramp_steps: Optional[int] = None, collapse_ratio: float = 0.5) -> SafeTrainingState:
    """
    开始安全训练并保存初始快照。
    @params:
        trainer: TrainerState 训练器
        interval: int 区间长度T
        ramp_steps: int | None 爬升步数T_r，默认等于T
        collapse_ratio: float 判定比例δ
    @return:
        s: SafeTrainingState 安全训练状态
    """
    s = SafeTrainingState(ramp_steps if ramp_steps is not None else interval, interval, collapse_ratio, t_r = trainer.step)
    s.initial = trainer.snapshot()
    return s


def r_schedule(s: SafeTrainingState, step: int) -> float:
    """
    自适应权重的爬升系数：step - t_r < T_r时为sin(π(step - t_r)/(2T_r))，否则为1。
    @params:
        s: SafeTrainingState 安全训练状态
        step: int 当前步
    @return:
        r: float 位于[0, 1]
    """
    elapsed = step - s.t_r
    if elapsed >= s.ramp_steps:
        return 1.0
    return float(np.sin(np.pi * max(elapsed, 0) / (2.0 * s.ramp_steps)))


def diversity(logits_t: Union[Tensor, np.ndarray]) -> int:
    """
    目标域批次上预测类别（argmax，平局取最小类别号）的种数。
    """
    arr = logits_t.data if isinstance(logits_t, Tensor) else np.asarray(logits_t)
    return int(np.unique(np.argmax(arr, axis = 1)).size)


def safe_training_tick(s: SafeTrainingState, trainer: TrainerState, div: int) -> Tuple[SafeTrainingState, TrainerState, bool]:
    """
    每个训练步之后调用一次。在区间边界上：区间平均多样性低于δ·历史最大值时恢复快照并令t_r为当前步，
    否则接受该区间并刷新快照。
    @params:
        s: SafeTrainingState 安全训练状态
        trainer: TrainerState 训练器
        div: int 本步的多样性
    @return:
        s: SafeTrainingState 更新后的安全训练状态
        trainer: TrainerState 可能被恢复的训练器
        restored: bool 是否发生了恢复
    """
    s.div_sum += float(div)
    s.div_count += 1
    if s.div_count < s.interval:
        return s, trainer, False
    mean = s.div_sum / s.div_count
    s.div_sum, s.div_count = 0.0, 0
    if s.history and mean < s.collapse_ratio * max(s.history):
        snap = s.snapshot if s.snapshot is not None else s.initial
        trainer.restore(snap)
        s.t_r = trainer.step
        s.restores += 1
        logger.info("Diversity dropped to %.2f (best %.2f) at step %d; restored the step-%d snapshot", mean, max(s.history), trainer.step, snap.step)
        return s, trainer, True
    s.history.append(mean)
    s.snapshot = trainer.snapshot()
    return s, trainer, False

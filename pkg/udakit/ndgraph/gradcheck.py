import numpy as np
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Mapping, Optional
from udakit.ndgraph import function as F
from udakit.ndgraph.tape import Tape, Var


"""
有限差分梯度检验。
相对误差定义为|a - fd| / max(1, |a|)，其中fd为步长h的中心差分。
"""


STEP = 1e-5
TOLERANCE = 1e-4
KINK_MARGIN = 1e-3


Builder = Callable[[Tape, Dict[str, Var]], Var]


@dataclass
class GradCheckReport:
    name: str
    max_error: float
    worst_input: str
    worst_index: tuple
    kink_margin: float
    tolerance: float = TOLERANCE


    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


    def __str__(self) -> str:
        return "%s: max rel err %.3e at %s%s (%s)" % (self.name, self.max_error, self.worst_input, list(self.worst_index), "ok" if self.passed else "FAILED")


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """
    逐元素的相对误差。
    @params:
        analytic: np.ndarray 反向传播得到的梯度
        numeric: np.ndarray 有限差分得到的梯度
    @return:
        err: np.ndarray 相对误差
    """
    return np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))


def kink_margin(tape: Tape) -> float:
    """
    磁带上所有relu与clip的输入离不可导点的最近距离。
    @params:
        tape: Tape 已完成前向传播的磁带
    @return:
        margin: float 最近距离，没有此类结点时为inf
    """
    margin = np.inf
    for node in tape.nodes:
        if node.op is F.Relu:
            x = tape.nodes[node.parents[0]].value.data
            if x.size:
                margin = min(margin, float(np.min(np.abs(x))))
        elif node.op is F.Clip:
            x = tape.nodes[node.parents[0]].value.data
            if x.size:
                margin = min(margin, float(np.min(np.minimum(np.abs(x - node.ctx.low), np.abs(x - node.ctx.high)))))
    return margin


def evaluate(build: Builder, inputs: Mapping[str, np.ndarray], requires_grad: Iterable[str] = ()) -> float:
    """
    在新磁带上执行一次前向传播并返回标量值。
    """
    tape = Tape()
    needs = set(requires_grad)
    leaves = {k: tape.leaf(v, requires_grad = k in needs, name = k) for k, v in inputs.items()}
    return build(tape, leaves).item()


def numeric_gradient(value: Callable[[Dict[str, np.ndarray]], float], inputs: Mapping[str, np.ndarray], key: str, h: float = STEP) -> np.ndarray:
    """
    对某个输入逐元素做中心差分。
    @params:
        value: Callable 输入字典到标量值的映射
        inputs: Mapping[str, np.ndarray] 基准点
        key: str 要扰动的输入
        h: float 步长
    @return:
        grad: np.ndarray 数值梯度，形状与该输入相同
    """
    base = {k: np.array(v, dtype = np.float64) for k, v in inputs.items()}
    x = base[key]
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        orig = x[idx]
        x[idx] = orig + h
        f_plus = value(base)
        x[idx] = orig - h
        f_minus = value(base)
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def check_gradients(name: str, build: Builder, inputs: Mapping[str, np.ndarray], wrt: Optional[Iterable[str]] = None, numeric: Optional[Callable[[str, Dict[str, np.ndarray]], float]] = None, h: float = STEP, tolerance: float = TOLERANCE) -> GradCheckReport:
    """
    比较反向传播梯度与中心差分梯度。
    @params:
        name: str 检验的名字
        build: Callable[[Tape, Dict[str, Var]], Var] 在给定磁带与叶结点上构建标量损失
        inputs: Mapping[str, np.ndarray] 基准点
        wrt: Iterable[str] 需要检验的输入，默认为全部
        numeric: Callable[[str, Dict], float] 可选，对输入key做差分时使用的标量函数，默认与build相同
        h: float 差分步长
        tolerance: float 相对误差上限
    @return:
        report: GradCheckReport 检验结果
    """
    keys = list(inputs.keys()) if wrt is None else list(wrt)
    tape = Tape()
    leaves = {k: tape.leaf(v, requires_grad = k in keys, name = k) for k, v in inputs.items()}
    loss = build(tape, leaves)
    grads = tape.backward(loss)
    margin = kink_margin(tape)
    worst, worst_key, worst_idx = 0.0, "", ()
    for key in keys:
        if numeric is None:
            value = lambda point: evaluate(build, point)
        else:
            value = lambda point, key = key: numeric(key, point)
        fd = numeric_gradient(value, inputs, key, h)
        err = relative_error(grads[leaves[key]], fd)
        if err.size and float(np.max(err)) >= worst:
            idx = np.unravel_index(int(np.argmax(err)), err.shape)
            worst, worst_key, worst_idx = float(err[idx]), key, tuple(int(i) for i in idx)
    return GradCheckReport(name, worst, worst_key, worst_idx, margin, tolerance)

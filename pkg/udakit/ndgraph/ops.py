from typing import Any, Callable, Dict, Sequence
from udakit.errors import ConfigError
from udakit.ndgraph import function as F
from udakit.ndgraph.tape import Gradients, Var


"""
计算图的函数式接口。
"""


def matmul(a: Any, b: Any) -> Var:
    """
    矩阵乘法，反向传播为dA = G·Bᵀ，dB = Aᵀ·G。
    @params:
        a: Var 形状为[m, k]
        b: Var 形状为[k, n]
    @return:
        y: Var 形状为[m, n]
    """
    return F.MatMul.apply(a, b)


def transpose(x: Var) -> Var:
    return F.Transpose.apply(x)


ELEMENTWISE: Dict[str, Callable[..., Var]] = {
    "relu": F.Relu.apply,
    "exp": F.Exp.apply,
    "log_clamped": F.LogClamped.apply,
    "sigmoid": F.Sigmoid.apply,
    "clip": F.Clip.apply,
    "add": F.Add.apply,
    "sub": F.Sub.apply,
    "mul": F.Mul.apply,
    "scale": F.Scale.apply,
}


def elementwise(op: str, *args: Any, **kwargs: Any) -> Var:
    """
    逐元素运算。
    @params:
        op: str 运算名，relu, exp, log_clamped, sigmoid, clip, add, sub, mul, scale之一
        *args: Var 操作数，形状须相同
        **kwargs: 运算参数，如scale的factor、clip的low与high
    @return:
        y: Var 结果
    """
    if op not in ELEMENTWISE:
        raise ConfigError("Unknown elementwise operation '%s', expected one of %s." % (op, sorted(ELEMENTWISE)))
    return ELEMENTWISE[op](*args, **kwargs)


def relu(x: Var) -> Var:
    return F.Relu.apply(x)


def exp(x: Var) -> Var:
    return F.Exp.apply(x)


def log_clamped(x: Var) -> Var:
    return F.LogClamped.apply(x)


def sigmoid(x: Var) -> Var:
    return F.Sigmoid.apply(x)


def clip(x: Var, low: float, high: float) -> Var:
    return F.Clip.apply(x, low = low, high = high)


def scale(x: Var, factor: float) -> Var:
    return F.Scale.apply(x, factor = factor)


def softmax_rows(logits: Var) -> Var:
    """
    逐行softmax。
    @params:
        logits: Var 形状为[B, C]
    @return:
        p: Var 形状为[B, C]，每行和为1
    """
    return F.SoftmaxRows.apply(logits)


def log_softmax_rows(logits: Var) -> Var:
    return F.LogSoftmaxRows.apply(logits)


REDUCTIONS: Dict[str, Callable[[Var], Var]] = {
    "mean": F.Mean.apply,
    "sum": F.Sum.apply,
    "frobenius_sq": F.FrobeniusSq.apply,
}


def reduce(op: str, x: Var) -> Var:
    """
    归约为1×1的标量。
    @params:
        op: str mean, sum或frobenius_sq
        x: Var 输入
    @return:
        y: Var 1×1的结果
    """
    if op not in REDUCTIONS:
        raise ConfigError("Unknown reduction '%s', expected one of %s." % (op, sorted(REDUCTIONS)))
    return REDUCTIONS[op](x)


def stop_gradient(x: Var) -> Var:
    """
    值不变，但不向x回传梯度。
    """
    return F.StopGradient.apply(x)


def take_rows(x: Var, index: Sequence[int]) -> Var:
    return F.TakeRows.apply(x, index = list(index))


def concat_rows(*xs: Var) -> Var:
    return F.ConcatRows.apply(*xs)


def backward(loss: Var) -> Gradients:
    """
    从标量损失出发反向传播。
    @params:
        loss: Var 1×1的损失
    @return:
        grads: Gradients 所有结点的梯度
    """
    return loss.tape.backward(loss)

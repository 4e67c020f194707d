import numpy as np
from typing import Sequence
from udakit.errors import RangeError, ShapeError
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var


"""
分类损失：源域上的交叉熵与域判别器的对抗损失。
"""


def one_hot(labels: Sequence[int], class_count: int) -> np.ndarray:
    """
    标签的独热编码。
    @params:
        labels: Sequence[int] 标签，位于[0, C)
        class_count: int 类别数C
    @return:
        y: np.ndarray 形状为[n, C]
    """
    labels = np.asarray(labels, dtype = np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        bad = labels[(labels < 0) | (labels >= class_count)][0]
        raise RangeError("Label %d is out of range for %d classes." % (bad, class_count))
    y = np.zeros((labels.size, class_count))
    y[np.arange(labels.size), labels] = 1.0
    return y


def cross_entropy(logits: Var, labels: Sequence[int]) -> Var:
    """
    交叉熵损失-(1/B)Σlog softmax(logits)[i, y_i]。
    @params:
        logits: Var 形状为[B, C]
        labels: Sequence[int] 长度为B的标签
    @return:
        loss: Var 1×1的损失
    """
    batch, class_count = logits.shape
    y = one_hot(labels, class_count)
    if y.shape[0] != batch:
        raise ShapeError("Got %d labels for %d rows of logits." % (y.shape[0], batch))
    log_p = ops.log_softmax_rows(logits)
    return ops.scale(ops.reduce("sum", log_p * logits.tape.constant(y)), -1.0 / batch)


def domain_adv_loss(d_out: Var, z: Sequence[float]) -> Var:
    """
    域判别器的二元交叉熵-(1/2B)Σ[z log D + (1-z) log(1-D)]。
    @params:
        d_out: Var 判别器输出，形状为[2B, 1]，位于(0, 1)
        z: Sequence[float] 域标签，源域为1，目标域为0
    @return:
        loss: Var 1×1的损失
    """
    z = np.asarray(z, dtype = np.float64).reshape(-1, 1)
    if z.shape[0] != d_out.shape[0] or d_out.shape[1] != 1:
        raise ShapeError("Domain flags of length %d don't match discriminator output of shape %s." % (z.shape[0], d_out.shape))
    tape = d_out.tape
    n = z.shape[0]
    ones = tape.constant(np.ones_like(z))
    pos = tape.constant(z) * ops.log_clamped(d_out)
    neg = tape.constant(1.0 - z) * ops.log_clamped(ones - d_out)
    return ops.scale(ops.reduce("sum", pos + neg), -1.0 / n)

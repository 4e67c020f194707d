import numpy as np
from typing import Optional, Tuple, Union
from udakit.errors import ShapeError
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var


"""
自我修正损失：干净预测与扰动预测之间、经置信度过滤的双向KL散度，以及预测熵。
"""


def row_sums(x: Var) -> Var:
    return ops.matmul(x, x.tape.constant(np.ones((x.shape[1], 1))))


def kl_rows(p: Var, q: Var) -> Var:
    """
    逐行的KL(p_i‖q_i) = Σ_c p_ic (log p_ic - log q_ic)，0·log 0按0计。
    @params:
        p: Var 形状为[B, C]
        q: Var 形状为[B, C]
    @return:
        kl: Var 形状为[B, 1]
    """
    if p.shape != q.shape:
        raise ShapeError("Can't compare predictions of shape %s with predictions of shape %s." % (p.shape, q.shape))
    return row_sums(p * (ops.log_clamped(p) - ops.log_clamped(q)))


def kl_div(p: Var, q: Var) -> Var:
    """
    两个分布之间的KL散度。
    @params:
        p: Var 形状为[1, C]的分布
        q: Var 形状为[1, C]的分布
    @return:
        kl: Var 1×1的散度
    """
    return ops.reduce("sum", kl_rows(p, q))


def confidence_filter(probs: Union[Var, np.ndarray], eps: float) -> np.ndarray:
    """
    置信度过滤：最大类别概率严格大于eps的行。
    @params:
        probs: Var | np.ndarray 预测，形状为[B, C]
        eps: float 阈值ε
    @return:
        idx: np.ndarray 入选行的下标（升序）
    """
    arr = probs.value.data if isinstance(probs, Var) else np.asarray(probs)
    return np.flatnonzero(np.max(arr, axis = 1) > eps)


def filtered_mean(kl: Var, idx: np.ndarray) -> Var:
    if idx.size == 0:
        return kl.tape.constant(np.zeros((1, 1)))
    return ops.reduce("mean", ops.take_rows(kl, idx))


def sr_loss(p: Var, p_tilde: Var, omega: float, eps: float, filters: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Var:
    """
    双向自我修正损失
    ω·E_{F[p]}KL(p‖p̃) + (1-ω)·E_{F[p̃]}KL(p̃‖p)，
    期望取在各自的过滤集合上，过滤集合为空的一项记为0。
    @params:
        p: Var 干净输入上的预测，形状为[B, C]
        p_tilde: Var 扰动输入上的预测，形状为[B, C]
        omega: float 两个方向的权重ω
        eps: float 置信度阈值ε
        filters: Tuple[np.ndarray, np.ndarray] 可选，事先确定的两个过滤集合
    @return:
        loss: Var 1×1的损失
    """
    if p.shape != p_tilde.shape:
        raise ShapeError("Clean predictions %s and perturbed predictions %s differ in shape." % (p.shape, p_tilde.shape))
    if filters is None:
        filters = (confidence_filter(p, eps), confidence_filter(p_tilde, eps))
    forward = filtered_mean(kl_rows(p, p_tilde), filters[0])
    reverse = filtered_mean(kl_rows(p_tilde, p), filters[1])
    return ops.scale(forward, omega) + ops.scale(reverse, 1.0 - omega)


def entropy_mean(probs: Var) -> Var:
    """
    平均预测熵-(1/B)ΣΣ p log p。
    """
    return ops.scale(ops.reduce("sum", probs * ops.log_clamped(probs)), -1.0 / probs.shape[0])

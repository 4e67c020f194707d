import numpy as np
from dataclasses import dataclass
from typing import Optional, Sequence, Union
from udakit.errors import ShapeError
from udakit.divergences.kernel import KernelSpec, gaussian_kernel, squared_distances
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var


"""
最大均值差异（MMD）、多核MMD与按类别加权的局部MMD（LMMD）。
所有估计都写成拼接样本Z = [X; Y]上核矩阵的二次型sᵀKs。
"""


def mmd_from_kernel(k: Var, n_s: int, n_t: int) -> Var:
    tape = k.tape
    s = np.concatenate([np.full(n_s, 1.0 / n_s), np.full(n_t, -1.0 / n_t)]).reshape(-1, 1)
    return ops.matmul(ops.matmul(tape.constant(s.T), k), tape.constant(s))


def pooled_distances(x: Var, y: Var) -> Var:
    if x.shape[1] != y.shape[1]:
        raise ShapeError("Source samples %s and target samples %s differ in width." % (x.shape, y.shape))
    z = ops.concat_rows(x, y)
    return squared_distances(z, z)


def mmd2(x: Var, y: Var, sigma: float) -> Var:
    """
    单一带宽下的MMD平方：
    (1/n_s²)Σk(x_i, x_j) + (1/n_t²)Σk(y_i, y_j) - (2/(n_s n_t))Σk(x_i, y_j)。
    @params:
        x: Var 源域样本，形状为[n_s, d]
        y: Var 目标域样本，形状为[n_t, d]
        sigma: float 带宽σ
    @return:
        loss: Var 1×1的MMD平方
    """
    return mmd_from_kernel(gaussian_kernel(pooled_distances(x, y), sigma), x.shape[0], y.shape[0])


def mk_mmd2(x: Var, y: Var, kernel: KernelSpec, sigmas: Optional[Sequence[float]] = None) -> Var:
    """
    多核MMD：各带宽下MMD平方的平均。距离矩阵只计算一次。
    @params:
        x: Var 源域样本
        y: Var 目标域样本
        kernel: KernelSpec 带宽设定
        sigmas: Sequence[float] 可选，已确定的带宽；默认由kernel对拼接样本求得（不参与求导）
    @return:
        loss: Var 1×1的损失
    """
    if sigmas is None:
        sigmas = kernel.resolve(np.vstack([x.value.data, y.value.data]))
    dist = pooled_distances(x, y)
    total = None
    for sigma in sigmas:
        term = mmd_from_kernel(gaussian_kernel(dist, sigma), x.shape[0], y.shape[0])
        total = term if total is None else total + term
    return ops.scale(total, 1.0 / len(sigmas))


@dataclass(frozen = True)
class ClassWeights:
    w: np.ndarray


    @property
    def class_count(self) -> int:
        return self.w.shape[0]


    @property
    def present(self) -> np.ndarray:
        """
        各类别是否在本批次出现（权重行非零）。
        """
        return np.sum(self.w, axis = 1) > 0.0


def lmmd_weights(labels_or_probs: Union[Sequence[int], np.ndarray], class_count: int) -> ClassWeights:
    """
    LMMD的类别权重ω_i^c = y_ic / Σ_j y_jc。
    @params:
        labels_or_probs: Sequence[int] | np.ndarray 硬标签（一维）或逐行归一化的软预测（形状为[n, C]）
        class_count: int 类别数C
    @return:
        weights: ClassWeights 形状为[C, n]，缺席的类别对应全零行
    """
    arr = np.asarray(labels_or_probs)
    if arr.ndim == 1:
        y = np.zeros((arr.size, class_count))
        y[np.arange(arr.size), arr.astype(np.int64)] = 1.0
    else:
        y = np.asarray(arr, dtype = np.float64)
        if y.shape[1] != class_count:
            raise ShapeError("Soft predictions have %d columns for %d classes." % (y.shape[1], class_count))
    totals = np.sum(y, axis = 0)
    w = np.zeros((class_count, y.shape[0]))
    live = totals > 0.0
    w[live] = (y[:, live] / totals[live]).T
    return ClassWeights(w)


def lmmd2(xs: Var, xt: Var, ws: ClassWeights, wt: ClassWeights, kernel: KernelSpec, sigmas: Optional[Sequence[float]] = None) -> Var:
    """
    局部MMD：(1/C')Σ_c ‖Σ_i ω_i^{sc}φ(x_i) - Σ_j ω_j^{tc}φ(x_j)‖²，
    只统计在两个域中都出现的C'个类别；C' = 0时损失为0。
    @params:
        xs: Var 源域样本，形状为[n_s, d]
        xt: Var 目标域样本，形状为[n_t, d]
        ws: ClassWeights 源域权重
        wt: ClassWeights 目标域权重
        kernel: KernelSpec 带宽设定，多个带宽时取平均
        sigmas: Sequence[float] 可选，已确定的带宽
    @return:
        loss: Var 1×1的损失
    """
    if ws.class_count != wt.class_count:
        raise ShapeError("Source weights cover %d classes but target weights cover %d." % (ws.class_count, wt.class_count))
    if ws.w.shape[1] != xs.shape[0] or wt.w.shape[1] != xt.shape[0]:
        raise ShapeError("Weights %s / %s don't match samples %s / %s." % (ws.w.shape, wt.w.shape, xs.shape, xt.shape))
    tape = xs.tape
    mask = ws.present & wt.present
    active = int(np.sum(mask))
    if active == 0:
        return tape.constant(np.zeros((1, 1)))
    if sigmas is None:
        sigmas = kernel.resolve(np.vstack([xs.value.data, xt.value.data]))
    s = tape.constant(np.hstack([ws.w[mask], -wt.w[mask]]))
    eye = tape.constant(np.eye(active))
    dist = pooled_distances(xs, xt)
    total = None
    for sigma in sigmas:
        m = ops.matmul(ops.matmul(s, gaussian_kernel(dist, sigma)), s.T)
        term = ops.reduce("sum", m * eye)
        total = term if total is None else total + term
    return ops.scale(total, 1.0 / (active * len(sigmas)))

import numpy as np
from udakit.errors import ContractError, ShapeError
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var


"""
Deep Coral：源域与目标域特征协方差之差的Frobenius范数平方。
"""


def covariance(dm: Var) -> Var:
    """
    协方差矩阵C = (DᵀD - (1/n)(1ᵀD)ᵀ(1ᵀD)) / (n-1)。
    @params:
        dm: Var 特征，形状为[n, d]
    @return:
        c: Var 形状为[d, d]
    """
    n = dm.shape[0]
    if n < 2:
        raise ContractError("Covariance needs at least 2 rows, got %d." % (n,))
    ones = dm.tape.constant(np.ones((1, n)))
    col_sum = ops.matmul(ones, dm)
    gram = ops.matmul(dm.T, dm)
    outer = ops.matmul(col_sum.T, col_sum)
    return ops.scale(gram - ops.scale(outer, 1.0 / n), 1.0 / (n - 1))


def coral_loss(source_feats: Var, target_feats: Var) -> Var:
    """
    Coral损失‖C_S - C_T‖_F² / (4d²)。
    @params:
        source_feats: Var 源域特征，形状为[n_S, d]
        target_feats: Var 目标域特征，形状为[n_T, d]
    @return:
        loss: Var 1×1的损失
    """
    d = source_feats.shape[1]
    if target_feats.shape[1] != d:
        raise ShapeError("Source features %s and target features %s differ in width." % (source_feats.shape, target_feats.shape))
    diff = covariance(source_feats) - covariance(target_feats)
    return ops.scale(ops.reduce("frobenius_sq", diff), 1.0 / (4.0 * d * d))

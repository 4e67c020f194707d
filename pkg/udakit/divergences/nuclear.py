import numpy as np
from typing import NamedTuple, Optional, Tuple
from udakit.errors import NumericError
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Context, Function, Var


"""
核范数‖A‖_* = Σσ_i，奇异值分解由单边Jacobi方法求得；以及批次核范数最大化（BNM）损失。
"""


MAX_SWEEPS = 60
ORTHO_TOLERANCE = 1e-13


class Svd(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def jacobi_svd(a: np.ndarray, max_sweeps: int = MAX_SWEEPS) -> Svd:
    """
    单边Jacobi（Hestenes）奇异值分解，A = U diag(s) Vᵀ。
    对列数不多于行数的矩阵反复做列对的平面旋转，直到所有列两两正交。
    @params:
        a: np.ndarray 形状为[m, n]
        max_sweeps: int 最多扫描轮数
    @return:
        svd: Svd 瘦分解，U形状为[m, k]，s长度为k（降序），V形状为[n, k]，k = min(m, n)
    """
    a = np.asarray(a, dtype = np.float64)
    if a.shape[0] < a.shape[1]:
        t = jacobi_svd(a.T, max_sweeps)
        return Svd(t.v, t.s, t.u)
    u = a.copy()
    n = u.shape[1]
    v = np.eye(n)
    residual = 0.0
    for sweep in range(max_sweeps):
        residual = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = float(u[:, i] @ u[:, i])
                beta = float(u[:, j] @ u[:, j])
                gamma = float(u[:, i] @ u[:, j])
                if alpha == 0.0 or beta == 0.0:
                    continue
                off = abs(gamma) / np.sqrt(alpha * beta)
                residual = max(residual, off)
                if off <= ORTHO_TOLERANCE:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0.0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                ui = u[:, i].copy()
                u[:, i] = c * ui - s * u[:, j]
                u[:, j] = s * ui + c * u[:, j]
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * v[:, j]
                v[:, j] = s * vi + c * v[:, j]
        if residual <= ORTHO_TOLERANCE:
            break
    else:
        raise NumericError("Jacobi SVD did not converge after %d sweeps (residual %.3e)." % (max_sweeps, residual))
    sigma = np.sqrt(np.sum(u * u, axis = 0))
    order = np.argsort(-sigma, kind = "stable")
    sigma = sigma[order]
    u = u[:, order]
    v = v[:, order]
    live = sigma > 0.0
    u[:, live] = u[:, live] / sigma[live]
    u[:, ~live] = 0.0
    return Svd(u, sigma, v)


class NuclearNorm(Function):
    name = "nuclear_norm"


    @staticmethod
    def forward(ctx: Context, a: np.ndarray) -> np.ndarray:
        """
        核范数的前向传播函数。
        @params:
            a: np.ndarray 形状为[B, C]
        @return:
            y: np.ndarray 1×1的奇异值之和
        """
        svd = jacobi_svd(a)
        live = svd.s > 0.0
        ctx.save_for_backward(svd.u[:, live] @ svd.v[:, live].T)
        return np.array([[np.sum(svd.s)]])


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        """
        核范数的反向传播函数，次梯度为UVᵀ。
        """
        uv = ctx.saved_arrays[0]
        return (grad_output[0, 0] * uv,)


def nuclear_norm(a: Var) -> Var:
    return NuclearNorm.apply(a)


def bnm_loss(probs: Var) -> Var:
    """
    BNM损失-(1/B)‖A‖_*，最小化它即最大化预测矩阵的核范数。
    @params:
        probs: Var 逐行归一化的预测A，形状为[B, C]
    @return:
        loss: Var 1×1的损失
    """
    return ops.scale(nuclear_norm(probs), -1.0 / probs.shape[0])

import logging
import numpy as np
from dataclasses import dataclass
from scipy.spatial.distance import pdist
from typing import Any, Dict, Optional, Tuple
from udakit.errors import ConfigError, ShapeError
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var


"""
高斯核k(x, y) = exp(-‖x - y‖² / (2σ²))及其带宽设定。
"""


logger = logging.getLogger(__name__)


DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen = True)
class KernelSpec:
    bandwidths: Tuple[float, ...] = ()
    multipliers: Tuple[float, ...] = DEFAULT_MULTIPLIERS
    median_heuristic: bool = True


    def __post_init__(self) -> None:
        """
        核带宽：固定的σ列表，或以批次内两两距离的中位数为基准、乘以各倍数。
        @params:
            bandwidths: Tuple[float] 固定带宽，仅在median_heuristic为False时使用
            multipliers: Tuple[float] 中位数启发式的倍数
            median_heuristic: bool 是否使用中位数启发式
        """
        object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))
        object.__setattr__(self, "multipliers", tuple(float(m) for m in self.multipliers))
        values = self.multipliers if self.median_heuristic else self.bandwidths
        if not len(values):
            raise ConfigError("A kernel needs at least one bandwidth.")
        if any(not np.isfinite(v) or v <= 0 for v in values):
            raise ConfigError("All bandwidths must be positive, got %s." % (list(values),))


    @classmethod
    def fixed(cls, *bandwidths: float) -> "KernelSpec":
        return cls(bandwidths = tuple(bandwidths), median_heuristic = False)


    def resolve(self, pooled: Optional[np.ndarray] = None) -> Tuple[float, ...]:
        """
        确定本批次所用的带宽。
        @params:
            pooled: np.ndarray 源域与目标域拼接后的特征，仅中位数启发式使用
        @return:
            sigmas: Tuple[float] 各带宽
        """
        if not self.median_heuristic:
            return self.bandwidths
        base = median_distance(pooled)
        return tuple(base * m for m in self.multipliers)


    def extra_repr(self) -> str:
        if self.median_heuristic:
            return "median x %s" % (list(self.multipliers),)
        return "sigma=%s" % (list(self.bandwidths),)


    def to_dict(self) -> Dict[str, Any]:
        if self.median_heuristic:
            return {"multipliers": list(self.multipliers)}
        return {"bandwidths": list(self.bandwidths)}


    @classmethod
    def from_dict(cls, d: Optional[Dict[str, Any]]) -> "KernelSpec":
        if d is None:
            return cls()
        unknown = set(d) - {"bandwidths", "multipliers"}
        if unknown:
            raise ConfigError("Unknown kernel fields %s." % (sorted(unknown),))
        if "bandwidths" in d:
            return cls.fixed(*d["bandwidths"])
        return cls(multipliers = tuple(d.get("multipliers", DEFAULT_MULTIPLIERS)))


def median_distance(pooled: Optional[np.ndarray]) -> float:
    """
    两两欧氏距离的中位数；不足两点或中位数为零时取1。
    """
    if pooled is None or pooled.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(pooled)))
    if not np.isfinite(med) or med <= 0.0:
        logger.debug("Degenerate median distance %r, falling back to 1.0", med)
        return 1.0
    return med


def squared_distances(x: Var, y: Var) -> Var:
    """
    两两距离的平方‖x_i‖² + ‖y_j‖² - 2x_i·y_j，全部由矩阵乘法构成。
    @params:
        x: Var 形状为[n, d]
        y: Var 形状为[m, d]
    @return:
        dist: Var 形状为[n, m]
    """
    if x.shape[1] != y.shape[1]:
        raise ShapeError("Can't compare samples of shape %s with samples of shape %s." % (x.shape, y.shape))
    tape = x.tape
    n, d = x.shape
    m = y.shape[0]
    ones_d = tape.constant(np.ones((d, 1)))
    x_norm = ops.matmul(ops.matmul(x * x, ones_d), tape.constant(np.ones((1, m))))
    y_norm = ops.matmul(tape.constant(np.ones((n, 1))), ops.matmul(y * y, ones_d).T)
    cross = ops.matmul(x, y.T)
    return x_norm + y_norm - ops.scale(cross, 2.0)


def gaussian_kernel(sq_dist: Var, sigma: float) -> Var:
    """
    由距离平方计算高斯核矩阵。
    """
    return ops.exp(ops.scale(sq_dist, -1.0 / (2.0 * sigma * sigma)))

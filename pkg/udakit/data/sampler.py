import numpy as np
from dataclasses import dataclass
from typing import Optional, Tuple
from udakit.errors import ConfigError, ContractError, ShapeError
from udakit.data.dataset import Dataset
from udakit.ndgraph.tensor import Tensor


"""
2B样本的均衡小批次：B个源域样本与B个目标域样本。
"""


@dataclass(frozen = True, eq = False)
class BatchPair:
    xs: Tensor
    ys: np.ndarray
    xt: Tensor
    z: np.ndarray
    yt_labeled: Optional[Tuple[np.ndarray, np.ndarray]] = None


    def __post_init__(self) -> None:
        """
        @params:
            xs: Tensor 源域特征，形状为[B, d]
            ys: np.ndarray 源域标签，长度为B
            xt: Tensor 目标域特征，形状为[B, d]
            z: np.ndarray 域标签，B个1之后接B个0
            yt_labeled: Tuple[np.ndarray, np.ndarray] | None 批次内带标签的目标域样本（批内下标，标签）
        """
        b = self.xs.rows
        if self.xt.rows != b or len(self.ys) != b:
            raise ShapeError("A balanced batch needs equal source and target counts, got %d and %d." % (b, self.xt.rows))
        if len(self.z) != 2 * b or int(np.sum(self.z)) != b:
            raise ShapeError("Domain flags must hold %d ones and %d zeros." % (b, b))


    @property
    def size(self) -> int:
        return self.xs.rows


def draw_indices(n: int, b: int, rng: np.random.Generator) -> np.ndarray:
    """
    从n个样本中均匀抽取b个：n ≥ b时不放回，否则有放回。
    """
    if n >= b:
        return rng.choice(n, size = b, replace = False)
    return rng.integers(0, n, size = b)


def sample_balanced_batch(source: Dataset, target: Dataset, batch_size: int, rng: np.random.Generator, labeled_target: Optional[np.ndarray] = None) -> BatchPair:
    """
    抽取一个2B样本的均衡批次。
    @params:
        source: Dataset 带标签的源域
        target: Dataset 目标域
        batch_size: int 每个域的样本数B
        rng: np.random.Generator 随机数生成器
        labeled_target: np.ndarray | None 标签可见的目标域样本下标（半监督设定）
    @return:
        batch: BatchPair 批次
    """
    if not source.has_labels:
        raise ContractError("The source domain '%s' has no labels." % (source.domain_tag,))
    if batch_size < 1:
        raise ConfigError("Batch size must be at least 1, got %d." % (batch_size,))
    if source.dim != target.dim:
        raise ShapeError("Source width %d differs from target width %d." % (source.dim, target.dim))
    si = draw_indices(len(source), batch_size, rng)
    ti = draw_indices(len(target), batch_size, rng)
    z = np.concatenate([np.ones(batch_size), np.zeros(batch_size)])
    yt_labeled = None
    if labeled_target is not None and len(labeled_target):
        if not target.has_labels:
            raise ContractError("Labeled target rows were requested but '%s' has no labels." % (target.domain_tag,))
        hits = np.flatnonzero(np.isin(ti, labeled_target))
        if hits.size:
            yt_labeled = (hits, target.labels[ti[hits]])
    return BatchPair(Tensor(source.features.data[si]), source.labels[si], Tensor(target.features.data[ti]), z, yt_labeled)


def labeled_subset(target: Dataset, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """
    选出标签可见的目标域样本。
    @params:
        target: Dataset 目标域
        fraction: float 比例，位于[0, 1]
        rng: np.random.Generator 随机数生成器
    @return:
        idx: np.ndarray 升序的样本下标
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("The labeled fraction must lie in [0, 1], got %r." % (fraction,))
    count = int(round(fraction * len(target)))
    if count == 0:
        return np.zeros(0, dtype = np.int64)
    if not target.has_labels:
        raise ContractError("Can't reveal labels of the unlabeled domain '%s'." % (target.domain_tag,))
    return np.sort(rng.choice(len(target), size = count, replace = False))

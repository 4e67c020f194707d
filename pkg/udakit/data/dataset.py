import numpy as np
from dataclasses import dataclass
from typing import Any, Optional, Tuple
from udakit.errors import ConfigError, RangeError, ShapeError
from udakit.ndgraph.tensor import Tensor


"""
一个域上的特征数据集。源域带标签；目标域的标签只用于评估。
"""


@dataclass(frozen = True, eq = False)
class Dataset:
    features: Tensor
    labels: Optional[np.ndarray]
    domain_tag: str
    class_count: int


    def __post_init__(self) -> None:
        """
        @params:
            features: Tensor 特征，形状为[N, d]
            labels: np.ndarray | None 长度为N的整数标签，位于[0, C)
            domain_tag: str 域名
            class_count: int 类别数C
        """
        if not isinstance(self.features, Tensor):
            object.__setattr__(self, "features", Tensor(self.features))
        if self.features.rows < 1:
            raise ShapeError("A dataset needs at least one row.")
        if not self.features.is_finite():
            raise ShapeError("Dataset '%s' holds non-finite features." % (self.domain_tag,))
        if self.class_count < 1:
            raise ConfigError("The class count must be positive, got %d." % (self.class_count,))
        if self.labels is not None:
            labels = np.array(self.labels, dtype = np.int64).reshape(-1)
            if labels.size != self.features.rows:
                raise ShapeError("Got %d labels for %d rows." % (labels.size, self.features.rows))
            bad = (labels < 0) | (labels >= self.class_count)
            if np.any(bad):
                raise RangeError("Label %d is out of range for %d classes." % (labels[bad][0], self.class_count))
            labels.setflags(write = False)
            object.__setattr__(self, "labels", labels)


    def __len__(self) -> int:
        return self.features.rows


    def __getitem__(self, index: int) -> Tuple[np.ndarray, Optional[int]]:
        x = self.features.data[index]
        y = int(self.labels[index]) if self.labels is not None else None
        return x, y


    @property
    def dim(self) -> int:
        return self.features.cols


    @property
    def has_labels(self) -> bool:
        return self.labels is not None


    def with_features(self, features: Any) -> "Dataset":
        """
        换成新的特征，标签与域名不变。
        """
        return Dataset(Tensor(features), self.labels, self.domain_tag, self.class_count)


    def without_labels(self) -> "Dataset":
        return Dataset(self.features, None, self.domain_tag, self.class_count)


    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (self.labels is not None and other.labels is not None and np.array_equal(self.labels, other.labels))
        return self.features == other.features and same_labels and self.domain_tag == other.domain_tag and self.class_count == other.class_count

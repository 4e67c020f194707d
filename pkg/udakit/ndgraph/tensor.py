import numpy as np
from typing import Any, Tuple
from udakit.errors import ShapeError


"""
稠密的f64矩阵，是计算图中所有值与梯度的载体。
未挂载在计算图上的Tensor是不可变的值，可以在线程之间自由共享。
"""


class Tensor:
    __slots__ = ("_data",)


    def __init__(self, data: Any) -> None:
        """
        以行优先顺序存储的二维f64矩阵。标量被视为1×1矩阵，一维序列被视为行向量。
        @params:
            data: Any 可以转换为numpy数组的数据，会被复制
        """
        arr = np.array(data, dtype = np.float64)
        self._data = Tensor._freeze(arr)


    @staticmethod
    def _freeze(arr: np.ndarray) -> np.ndarray:
        """
        校正形状并设为只读。
        @params:
            arr: np.ndarray 原始数组
        @return:
            arr: np.ndarray 只读、行优先连续的二维数组
        """
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError("A tensor must be 2-D, got an array of shape %s." % (arr.shape,))
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write = False)
        return arr


    @classmethod
    def wrap(cls, arr: np.ndarray) -> "Tensor":
        """
        不复制地包装一个调用方不再修改的数组（前向传播的输出）。
        @params:
            arr: np.ndarray 数组
        @return:
            t: Tensor 张量
        """
        t = cls.__new__(cls)
        t._data = Tensor._freeze(arr)
        return t


    @classmethod
    def zeros(cls, shape: Tuple[int, int]) -> "Tensor":
        return cls.wrap(np.zeros(shape))


    @classmethod
    def ones(cls, shape: Tuple[int, int]) -> "Tensor":
        return cls.wrap(np.ones(shape))


    @classmethod
    def eye(cls, n: int) -> "Tensor":
        return cls.wrap(np.eye(n))


    @property
    def data(self) -> np.ndarray:
        """
        只读的底层数组。
        """
        return self._data


    @property
    def shape(self) -> Tuple[int, int]:
        return self._data.shape


    @property
    def rows(self) -> int:
        return self._data.shape[0]


    @property
    def cols(self) -> int:
        return self._data.shape[1]


    def numpy(self) -> np.ndarray:
        """
        导出一份可写的副本。
        @return:
            arr: np.ndarray 副本
        """
        return self._data.copy()


    def item(self) -> float:
        """
        取出1×1张量的值。
        @return:
            v: float 标量值
        """
        if self._data.shape != (1, 1):
            raise ShapeError("Only a 1x1 tensor has a scalar value, got shape %s." % (self._data.shape,))
        return float(self._data[0, 0])


    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self._data)))


    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))


    def __hash__(self) -> int:
        return hash((self.shape, self._data.tobytes()))


    def __repr__(self) -> str:
        return "Tensor(shape=%s, data=%s)" % (self.shape, np.array2string(self._data, precision = 4, threshold = 16))

import numpy as np
from typing import Dict, Iterable, List, Optional, Tuple


class Monitor:
    """
    监视器按名字记录一组标量序列。
    记录使用record函数，展示图片使用show函数，导出数据使用export函数。
    """


    def __init__(self, name: str) -> None:
        """
        监视器的框架。
        @params:
            name: str 该监视器的名字
        """
        self.name = name
        self.reset()


    def reset(self) -> None:
        """
        清空所有记录。
        """
        self.records: Dict[str, List[float]] = {}


    def keys(self) -> List[str]:
        return list(self.records.keys())


    def record(self, key: str, value: float) -> None:
        """
        向监视器中记录一个数据。
        @params:
            key: str 当前数据的标签
            value: float 当前数据
        """
        if key not in self.records:
            self.records[key] = []
        self.records[key].append(float(value))


    def export(self, key: str) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """
        输入对应的key，导出所需要的数据。
        @params:
            key: str 要导出哪一组数据
        @return:
            x: np.ndarray 记录的序号
            y: np.ndarray 记录的值
        """
        if key not in self.records:
            return None
        y = np.array(self.records[key])
        x = np.arange(0, len(y))
        return x, y


    def show(self, keys: Optional[Iterable[str]] = None, path: Optional[str] = None) -> None:
        """
        画出记录的曲线。
        @params:
            keys: Iterable[str] 可选，要展示哪些数据，None为全部展示
            path: str 可选，保存图片的路径；None则直接显示
        """
        import matplotlib
        if path is not None:
            matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        keys = self.keys() if keys is None else list(keys)
        fig, ax = plt.subplots(figsize = (8, 4))
        for key in keys:
            data = self.export(key)
            if data is not None:
                ax.plot(data[0], data[1], label = key)
        ax.set_title(self.name)
        ax.legend()
        if path is not None:
            fig.savefig(path, dpi = 120, bbox_inches = "tight")
            plt.close(fig)
        else:
            plt.show()

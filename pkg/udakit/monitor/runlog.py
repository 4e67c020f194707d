import csv
import os
from typing import List, Sequence
from udakit.monitor.skeleton import Monitor


"""
训练的运行日志：每步一行损失分解，写出为CSV。
"""


COLUMNS = ("step", "epoch", "lr", "total", "ce", "adapt", "sr", "r", "diversity")
INTEGER_COLUMNS = ("step", "epoch", "diversity")


class RunLog(Monitor):
    def __init__(self, name: str) -> None:
        """
        一次训练（一个任务的一个种子）的运行日志。
        @params:
            name: str 日志名，通常为"<任务>_<种子>"
        """
        super().__init__(name)


    def record_step(self, record) -> None:
        """
        记录一步的损失分解。
        @params:
            record: LossRecord 训练步返回的记录
        """
        for key in COLUMNS:
            self.record(key, getattr(record, key))


    def __len__(self) -> int:
        return len(self.records.get("step", []))


    def rows(self) -> List[List[str]]:
        out = []
        for i in range(len(self)):
            row = []
            for key in COLUMNS:
                v = self.records[key][i]
                row.append("%d" % (v,) if key in INTEGER_COLUMNS else "%.17g" % (v,))
            out.append(row)
        return out


    def write_csv(self, path: str) -> None:
        """
        写出CSV，列为step, epoch, lr, total, ce, adapt, sr, r, diversity。
        @params:
            path: str 文件路径
        """
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok = True)
        with open(path, "w", encoding = "utf-8", newline = "") as f:
            writer = csv.writer(f, lineterminator = "\n")
            writer.writerow(COLUMNS)
            writer.writerows(self.rows())


    def plot(self, path: str, keys: Sequence[str] = ("total", "ce", "adapt", "sr")) -> None:
        self.show(keys, path)

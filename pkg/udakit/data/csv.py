import csv
import math
import os
import numpy as np
from typing import List, Optional
from udakit.errors import ParseError
from udakit.data.dataset import Dataset
from udakit.ndgraph.tensor import Tensor


"""
CSV特征数据集的读写：UTF-8，逗号分隔，首行为表头；写出时保留17位有效数字以便精确往返。
"""


def load_csv(path: str, label_column: Optional[str] = None, class_count: int = 2, domain_tag: Optional[str] = None) -> Dataset:
    """
    读取CSV特征数据集。除标签列外的所有列都视为特征。
    @params:
        path: str 文件路径
        label_column: str | None 标签列名，None代表无标签（只能作为目标域）
        class_count: int 类别数C
        domain_tag: str | None 域名，默认取文件名
    @return:
        d: Dataset 数据集
    """
    if domain_tag is None:
        domain_tag = os.path.splitext(os.path.basename(path))[0]
    with open(path, "r", encoding = "utf-8", newline = "") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ParseError("'%s' is empty; a header row is required." % (path,), row = 1)
        header = [h.strip() for h in header]
        if label_column is not None and label_column not in header:
            raise ParseError("Column '%s' is missing from '%s' (columns: %s)." % (label_column, path, ", ".join(header)), row = 1, column = label_column)
        label_at = header.index(label_column) if label_column is not None else -1
        feature_at = [i for i in range(len(header)) if i != label_at]
        features: List[List[float]] = []
        labels: List[int] = []
        for row_no, row in enumerate(reader, start = 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError("Row %d of '%s' has %d cells, expected %d." % (row_no, path, len(row), len(header)), row = row_no)
            values = []
            for i in feature_at:
                try:
                    v = float(row[i])
                except ValueError:
                    raise ParseError("Non-numeric cell %r at row %d, column '%s' of '%s'." % (row[i], row_no, header[i], path), row = row_no, column = header[i]) from None
                if not math.isfinite(v):
                    raise ParseError("Non-finite cell %r at row %d, column '%s' of '%s'." % (row[i], row_no, header[i], path), row = row_no, column = header[i])
                values.append(v)
            features.append(values)
            if label_at >= 0:
                try:
                    labels.append(int(row[label_at]))
                except ValueError:
                    raise ParseError("Non-integer label %r at row %d, column '%s' of '%s'." % (row[label_at], row_no, label_column, path), row = row_no, column = label_column) from None
    if not features:
        raise ParseError("'%s' has a header but no data rows." % (path,), row = 2)
    arr = np.array(features, dtype = np.float64).reshape(len(features), len(feature_at))
    return Dataset(Tensor(arr), np.array(labels, dtype = np.int64) if label_at >= 0 else None, domain_tag, class_count)


def save_csv(d: Dataset, path: str, label_column: str = "label") -> None:
    """
    写出CSV特征数据集，特征列名为f0, f1, ...，有标签时追加标签列。
    @params:
        d: Dataset 数据集
        path: str 文件路径
        label_column: str 标签列名
    """
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok = True)
    header = ["f%d" % (i,) for i in range(d.dim)]
    if d.has_labels:
        header.append(label_column)
    with open(path, "w", encoding = "utf-8", newline = "") as f:
        writer = csv.writer(f, lineterminator = "\n")
        writer.writerow(header)
        for i in range(len(d)):
            row = ["%.17g" % (v,) for v in d.features.data[i]]
            if d.has_labels:
                row.append("%d" % (d.labels[i],))
            writer.writerow(row)

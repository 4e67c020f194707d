import csv
import os
import numpy as np
from typing import Optional
from udakit.data.dataset import Dataset
from udakit.data.pca import pca2
from udakit.models.bundle import ModelBundle, extract_features


"""
特征的二维投影：把源域与目标域的e_f输出合并后做PCA，用于观察两个域的特征是否对齐。
"""


EMBED_COLUMNS = ("domain_tag", "true_label", "pc1", "pc2")


def dump_embeddings(bundle: ModelBundle, source: Dataset, target: Dataset, path: str, plot_path: Optional[str] = None) -> np.ndarray:
    """
    写出每个样本的(domain_tag, true_label, pc1, pc2)，源域在前。
    @params:
        bundle: ModelBundle 模型
        source: Dataset 源域
        target: Dataset 目标域
        path: str CSV路径
        plot_path: str 可选，散点图路径
    @return:
        proj: np.ndarray 形状为[N_s + N_t, 2]的投影
    """
    feats = np.vstack([extract_features(bundle, source.features.data), extract_features(bundle, target.features.data)])
    proj = pca2(feats).numpy()
    tags = [source.domain_tag] * len(source) + [target.domain_tag] * len(target)
    labels = []
    for d in (source, target):
        labels += [None] * len(d) if d.labels is None else [int(y) for y in d.labels]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok = True)
    with open(path, "w", encoding = "utf-8", newline = "") as f:
        writer = csv.writer(f, lineterminator = "\n")
        writer.writerow(EMBED_COLUMNS)
        for tag, y, (a, b) in zip(tags, labels, proj):
            writer.writerow([tag, "" if y is None else "%d" % (y,), "%.17g" % (a,), "%.17g" % (b,)])
    if plot_path is not None:
        plot_embeddings(proj, len(source), labels, plot_path, (source.domain_tag, target.domain_tag))
    return proj


def plot_embeddings(proj: np.ndarray, n_source: int, labels, path: str, names = ("source", "target")) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    colors = np.array([-1 if y is None else y for y in labels])
    fig, ax = plt.subplots(figsize = (6, 6))
    ax.scatter(proj[:n_source, 0], proj[:n_source, 1], c = colors[:n_source], marker = "o", s = 8, cmap = "tab10", vmin = 0, vmax = 9, label = names[0])
    ax.scatter(proj[n_source:, 0], proj[n_source:, 1], c = colors[n_source:], marker = "x", s = 8, cmap = "tab10", vmin = 0, vmax = 9, label = names[1])
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    ax.legend()
    fig.savefig(path, dpi = 120, bbox_inches = "tight")
    plt.close(fig)

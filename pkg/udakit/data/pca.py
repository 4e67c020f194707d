import numpy as np
from typing import Union
from udakit.errors import ContractError
from udakit.ndgraph.tensor import Tensor


def pca2(features: Union[Tensor, np.ndarray]) -> Tensor:
    """
    投影到中心化特征的前两个主成分上。每个主成分的符号取使绝对值最大的载荷为正的一侧；
    特征不足两维时第二个分量补零。
    @params:
        features: Tensor 形状为[N, d]，N ≥ 2
    @return:
        proj: Tensor 形状为[N, 2]
    """
    x = features.data if isinstance(features, Tensor) else np.asarray(features, dtype = np.float64)
    if x.shape[0] < 2:
        raise ContractError("PCA needs at least 2 rows, got %d." % (x.shape[0],))
    centred = x - np.mean(x, axis = 0, keepdims = True)
    cov = centred.T @ centred / (x.shape[0] - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(-values, kind = "stable")[:2]
    components = vectors[:, order]
    for k in range(components.shape[1]):
        lead = np.argmax(np.abs(components[:, k]))
        if components[lead, k] < 0:
            components[:, k] = -components[:, k]
    proj = np.zeros((x.shape[0], 2))
    proj[:, :components.shape[1]] = centred @ components
    return Tensor(proj)

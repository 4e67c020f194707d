import numpy as np
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional
from udakit.errors import ConfigError, ShapeError
from udakit.models.layer import LayerSpec, Perturb, init_layers, mlp_forward, mlp_numpy
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var
from udakit.ndgraph.tensor import Tensor


"""
特征提取器e_f、标签分类器h与域判别器D三个网络的参数集合。
"""


PROB_FLOOR = 1e-7


@dataclass
class ModelBundle:
    ef: LayerSpec
    h: LayerSpec
    d: LayerSpec
    params: Dict[str, Tensor] = field(default_factory = dict)


    def __post_init__(self) -> None:
        check_widths(self.ef, self.h, self.d)


    @property
    def feature_dim(self) -> int:
        return self.ef.out_features


    @property
    def class_count(self) -> int:
        return self.h.out_features


    def names(self, prefix: Optional[str] = None) -> List[str]:
        """
        按初始化顺序列出参数名。
        @params:
            prefix: str 可选，只列出e_f、h或D之一（"ef"、"h"、"d"）的参数
        @return:
            names: List[str] 参数名
        """
        if prefix is None:
            return list(self.params.keys())
        return [k for k in self.params.keys() if k.split(".")[0] == prefix]


    def snapshot(self) -> "ModelBundle":
        """
        只读的快照。张量不可变，所以浅拷贝参数字典即可。
        """
        return ModelBundle(self.ef, self.h, self.d, dict(self.params))


    def extra_repr(self) -> str:
        return "ef=%s, h=%s, d=%s" % (self.ef.extra_repr(), self.h.extra_repr(), self.d.extra_repr())


def check_widths(ef: LayerSpec, h: LayerSpec, d: LayerSpec) -> None:
    if h.in_features != ef.out_features or d.in_features != ef.out_features:
        raise ConfigError("Classifier input (%d) and discriminator input (%d) must equal the feature width %d." % (h.in_features, d.in_features, ef.out_features))
    if d.out_features != 1:
        raise ConfigError("The domain discriminator must have a single output, got %d." % (d.out_features,))


def init_bundle(ef: LayerSpec, h: LayerSpec, d: LayerSpec, seed: int) -> ModelBundle:
    """
    初始化三个网络，权重取Glorot均匀分布，偏置为零。
    @params:
        ef: LayerSpec 特征提取器
        h: LayerSpec 标签分类器
        d: LayerSpec 域判别器
        seed: int 随机种子
    @return:
        m: ModelBundle 参数集合
    """
    check_widths(ef, h, d)
    rng = np.random.default_rng(seed)
    params = {}
    params.update(init_layers("ef", ef, rng))
    params.update(init_layers("h", h, rng))
    params.update(init_layers("d", d, rng))
    return ModelBundle(ef, h, d, params)


class Features(NamedTuple):
    features: Var
    hidden: List[Var]


def ef_forward(m: ModelBundle, x: Var, perturb: Optional[Perturb] = None) -> Features:
    """
    特征提取器的前向传播。
    @params:
        m: ModelBundle 参数
        x: Var 输入，形状为[B, d]
        perturb: Callable[[int, Var], Var] 可选，对隐藏层激活前的值b^l做替换
    @return:
        out: Features 特征I（形状为[B, feature_dim]）与各隐藏层激活前的值
    """
    out = mlp_forward("ef", m.ef, m.params, x, perturb)
    return Features(out.output, out.hidden)


def check_feature_width(m: ModelBundle, feats: Var) -> None:
    if feats.shape[1] != m.feature_dim:
        raise ShapeError("Features must have %d columns, got shape %s." % (m.feature_dim, feats.shape))


def classify(m: ModelBundle, feats: Var) -> Var:
    """
    标签分类器，返回未经softmax的logits，形状为[B, C]。
    """
    check_feature_width(m, feats)
    return mlp_forward("h", m.h, m.params, feats).output


def discriminate(m: ModelBundle, feats: Var) -> Var:
    """
    域判别器，经sigmoid后截断到[1e-7, 1 - 1e-7]。
    @params:
        m: ModelBundle 参数
        feats: Var 特征，形状为[2B, feature_dim]
    @return:
        d_out: Var 属于源域的概率，形状为[2B, 1]
    """
    check_feature_width(m, feats)
    logits = mlp_forward("d", m.d, m.params, feats).output
    return ops.clip(ops.sigmoid(logits), PROB_FLOOR, 1.0 - PROB_FLOOR)


def predict_logits(m: ModelBundle, x: np.ndarray) -> np.ndarray:
    """
    不经过磁带地计算h(e_f(x))。
    """
    return mlp_numpy("h", m.h, m.params, mlp_numpy("ef", m.ef, m.params, x))


def extract_features(m: ModelBundle, x: np.ndarray) -> np.ndarray:
    return mlp_numpy("ef", m.ef, m.params, x)

import numpy as np
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, NamedTuple, Optional, Tuple
from udakit.errors import ConfigError, ShapeError
from udakit.ndgraph import ops
from udakit.ndgraph.tape import Var
from udakit.ndgraph.tensor import Tensor


"""
全连接网络层。权重形状为[in, out]，前向传播为h·W + 1·b，隐藏层使用relu，输出层为线性。
"""


@dataclass(frozen = True)
class LayerSpec:
    widths: Tuple[int, ...]


    def __post_init__(self) -> None:
        """
        多层感知机的宽度序列，从输入宽度到输出宽度。
        @params:
            widths: Tuple[int] 各层宽度，至少两项（即至少一层）
        """
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ConfigError("A layer spec needs at least an input and an output width, got %s." % (list(self.widths),))
        if any(w < 1 for w in self.widths):
            raise ConfigError("All layer widths must be at least 1, got %s." % (list(self.widths),))


    @property
    def in_features(self) -> int:
        return self.widths[0]


    @property
    def out_features(self) -> int:
        return self.widths[-1]


    @property
    def depth(self) -> int:
        return len(self.widths) - 1


    def extra_repr(self) -> str:
        return "widths=%s" % ("-".join(str(w) for w in self.widths),)


    def to_dict(self) -> Dict[str, Any]:
        return {"widths": list(self.widths)}


    @classmethod
    def from_dict(cls, d: Any) -> "LayerSpec":
        if isinstance(d, Mapping):
            d = d.get("widths", ())
        return cls(tuple(d))


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """
    Glorot均匀初始化。
    @params:
        fan_in: int 输入宽度
        fan_out: int 输出宽度
        rng: np.random.Generator 随机数生成器
    @return:
        w: np.ndarray 形状为[fan_in, fan_out]，取值于±√(6/(fan_in+fan_out))
    """
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size = (fan_in, fan_out))


def init_layers(prefix: str, spec: LayerSpec, rng: np.random.Generator) -> Dict[str, Tensor]:
    """
    初始化一个多层感知机的参数，偏置为零。
    @params:
        prefix: str 参数名前缀，如"ef"
        spec: LayerSpec 宽度序列
        rng: np.random.Generator 随机数生成器
    @return:
        params: Dict[str, Tensor] 形如"ef.0.weight"、"ef.0.bias"的参数字典
    """
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
        params["%s.%d.weight" % (prefix, i)] = Tensor(glorot_uniform(fan_in, fan_out, rng))
        params["%s.%d.bias" % (prefix, i)] = Tensor.zeros((1, fan_out))
    return params


class MlpOutput(NamedTuple):
    output: Var
    hidden: List[Var]


Perturb = Callable[[int, Var], Var]


def mlp_forward(prefix: str, spec: LayerSpec, params: Mapping[str, Tensor], x: Var, perturb: Optional[Perturb] = None) -> MlpOutput:
    """
    多层感知机的前向传播，记录在x所在的磁带上。
    @params:
        prefix: str 参数名前缀
        spec: LayerSpec 宽度序列
        params: Mapping[str, Tensor] 参数
        x: Var 输入，形状为[B, in]
        perturb: Callable[[int, Var], Var] 可选，作用于第l个隐藏层激活前的值b^l，返回替换后的值
    @return:
        out: MlpOutput 输出与各隐藏层激活前的值（扰动之前）
    """
    if x.shape[1] != spec.in_features:
        raise ShapeError("Input of '%s' must have %d columns, got shape %s." % (prefix, spec.in_features, x.shape))
    tape = x.tape
    h = x
    hidden = []
    ones = tape.constant(np.ones((x.shape[0], 1)))
    for i in range(spec.depth):
        w = tape.parameter("%s.%d.weight" % (prefix, i), params["%s.%d.weight" % (prefix, i)])
        b = tape.parameter("%s.%d.bias" % (prefix, i), params["%s.%d.bias" % (prefix, i)])
        pre = ops.matmul(h, w) + ops.matmul(ones, b)
        if i == spec.depth - 1:
            h = pre
            break
        hidden.append(pre)
        if perturb is not None:
            pre = perturb(i, pre)
        h = ops.relu(pre)
    return MlpOutput(h, hidden)


def mlp_numpy(prefix: str, spec: LayerSpec, params: Mapping[str, Tensor], x: np.ndarray) -> np.ndarray:
    """
    不经过磁带的前向传播，用于评估。
    """
    if x.shape[1] != spec.in_features:
        raise ShapeError("Input of '%s' must have %d columns, got shape %s." % (prefix, spec.in_features, x.shape))
    h = x
    for i in range(spec.depth):
        h = h @ params["%s.%d.weight" % (prefix, i)].data + params["%s.%d.bias" % (prefix, i)].data
        if i < spec.depth - 1:
            h = np.maximum(h, 0.0)
    return h

import numpy as np
from dataclasses import dataclass, field, fields
from typing import Any, ClassVar, Dict, Optional, Type, Union
from udakit.errors import ConfigError
from udakit.divergences.kernel import KernelSpec
from udakit.models.grl import GrlCoefficient


"""
各算法的超参数。每个算法一个不可变的数据类，JSON中以"method"字段区分。
"""


@dataclass(frozen = True)
class OptimizerConfig:
    lr0: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 5e-4
    gamma: float = 10.0
    decay: float = 0.75


    def __post_init__(self) -> None:
        """
        带动量与权重衰减的SGD，学习率按lr0·(1 + γp)^(-decay)衰减。
        @params:
            lr0: float 初始学习率
            momentum: float 动量
            weight_decay: float 权重衰减
            gamma: float 衰减速度γ
            decay: float 衰减指数
        """
        if not self.lr0 > 0:
            raise ConfigError("The initial learning rate must be positive, got %r." % (self.lr0,))
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("Momentum must lie in [0, 1), got %r." % (self.momentum,))
        if self.weight_decay < 0 or self.gamma < 0 or self.decay < 0:
            raise ConfigError("Weight decay, gamma and decay must be non-negative.")


    def to_dict(self) -> Dict[str, Any]:
        return {"lr0": self.lr0, "momentum": self.momentum, "weight_decay": self.weight_decay, "gamma": self.gamma, "decay": self.decay}


    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "OptimizerConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError("Unknown optimizer fields %s." % (sorted(unknown),))
        return cls(**d)


DEFAULT_OPTIMIZERS: Dict[str, OptimizerConfig] = {
    "SourceOnly": OptimizerConfig(lr0 = 1e-2, weight_decay = 5e-4),
    "Coral": OptimizerConfig(lr0 = 3e-3, weight_decay = 5e-4),
    "DANN": OptimizerConfig(lr0 = 1e-2, weight_decay = 1e-3),
    "DAN": OptimizerConfig(lr0 = 1e-2, weight_decay = 5e-4),
    "DSAN": OptimizerConfig(lr0 = 1e-2, weight_decay = 5e-4),
    "BNM": OptimizerConfig(lr0 = 1e-3, weight_decay = 5e-4),
    "SSRT": OptimizerConfig(lr0 = 1e-3, weight_decay = 5e-4),
}


def check_weight(name: str, value: float) -> None:
    if not np.isfinite(value) or value < 0:
        raise ConfigError("'%s' must be finite and non-negative, got %r." % (name, value))


def check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError("'%s' must lie in [0, 1], got %r." % (name, value))


@dataclass(frozen = True)
class MethodConfig:
    method: ClassVar[str] = ""


    def default_optimizer(self) -> OptimizerConfig:
        return DEFAULT_OPTIMIZERS[self.method]


    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"method": self.method}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = v.to_dict() if hasattr(v, "to_dict") else v
        return d


    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MethodConfig":
        d = {k: v for k, v in d.items() if k != "method"}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown fields %s for method %s." % (sorted(unknown), cls.method))
        if "kernel" in d:
            d["kernel"] = KernelSpec.from_dict(d["kernel"])
        if "grl" in d:
            d["grl"] = GrlCoefficient.from_dict(d["grl"])
        return cls(**d)


@dataclass(frozen = True)
class SourceOnlyConfig(MethodConfig):
    method: ClassVar[str] = "SourceOnly"


@dataclass(frozen = True)
class CoralConfig(MethodConfig):
    method: ClassVar[str] = "Coral"
    lam: float = 1.0
    ramp: bool = False


    def __post_init__(self) -> None:
        check_weight("lam", self.lam)


@dataclass(frozen = True)
class DANConfig(MethodConfig):
    method: ClassVar[str] = "DAN"
    lam: float = 1.0
    kernel: KernelSpec = field(default_factory = KernelSpec)
    ramp: bool = False


    def __post_init__(self) -> None:
        check_weight("lam", self.lam)


@dataclass(frozen = True)
class DANNConfig(MethodConfig):
    method: ClassVar[str] = "DANN"
    grl: GrlCoefficient = field(default_factory = GrlCoefficient)
    lam: float = 1.0


    def __post_init__(self) -> None:
        check_weight("lam", self.lam)


@dataclass(frozen = True)
class DSANConfig(MethodConfig):
    method: ClassVar[str] = "DSAN"
    lam: float = 1.0
    kernel: KernelSpec = field(default_factory = KernelSpec)
    ramp: bool = False


    def __post_init__(self) -> None:
        check_weight("lam", self.lam)


@dataclass(frozen = True)
class BNMConfig(MethodConfig):
    method: ClassVar[str] = "BNM"
    lam: float = 1.0
    ramp: bool = False


    def __post_init__(self) -> None:
        check_weight("lam", self.lam)


@dataclass(frozen = True)
class SSRTConfig(MethodConfig):
    method: ClassVar[str] = "SSRT"
    alpha: float = 1.0
    beta: float = 0.2
    omega: float = 0.5
    eps: float = 0.8
    lambda_max: float = 0.3
    T: int = 100
    perturb_layer: int = 0
    grl: GrlCoefficient = field(default_factory = GrlCoefficient)
    collapse_ratio: float = 0.5
    ramp_steps: Optional[int] = None


    def __post_init__(self) -> None:
        """
        @params:
            alpha: float 对抗项的权重α
            beta: float 自我修正项的权重β
            omega: float 双向KL的权重ω
            eps: float 置信度阈值ε
            lambda_max: float 扰动强度λ的上限
            T: int 安全训练的区间长度（步）
            perturb_layer: int 被扰动的隐藏层
            grl: GrlCoefficient 梯度反转系数
            collapse_ratio: float 多样性骤降的判定比例δ
            ramp_steps: int | None r从0升到1所需的步数T_r，默认等于T
        """
        check_weight("alpha", self.alpha)
        check_weight("beta", self.beta)
        check_weight("lambda_max", self.lambda_max)
        check_unit("omega", self.omega)
        if not 0.0 <= self.eps < 1.0:
            raise ConfigError("'eps' must lie in [0, 1), got %r." % (self.eps,))
        if self.T < 1:
            raise ConfigError("The safe-training interval must be at least 1 step, got %d." % (self.T,))
        if self.perturb_layer < 0:
            raise ConfigError("'perturb_layer' must be non-negative, got %d." % (self.perturb_layer,))
        if not 0.0 < self.collapse_ratio < 1.0:
            raise ConfigError("'collapse_ratio' must lie in (0, 1), got %r." % (self.collapse_ratio,))
        if self.ramp_steps is not None and self.ramp_steps < 1:
            raise ConfigError("'ramp_steps' must be at least 1, got %d." % (self.ramp_steps,))


    @property
    def ramp_length(self) -> int:
        return self.T if self.ramp_steps is None else self.ramp_steps


AlgorithmConfig = Union[SourceOnlyConfig, CoralConfig, DANConfig, DANNConfig, DSANConfig, BNMConfig, SSRTConfig]


CONFIGS: Dict[str, Type[MethodConfig]] = {c.method: c for c in (SourceOnlyConfig, CoralConfig, DANConfig, DANNConfig, DSANConfig, BNMConfig, SSRTConfig)}


def parse_algorithm(d: Union[str, Dict[str, Any]]) -> MethodConfig:
    """
    由JSON对象（或单独的方法名）构造算法配置，未给出的字段取默认值。
    @params:
        d: Dict | str 如{"method": "DSAN", "lam": 1.0}
    @return:
        cfg: AlgorithmConfig 算法配置
    """
    if isinstance(d, str):
        d = {"method": d}
    method = d.get("method")
    if method not in CONFIGS:
        raise ConfigError("Unknown method %r, expected one of %s." % (method, sorted(CONFIGS)))
    return CONFIGS[method].from_dict(d)

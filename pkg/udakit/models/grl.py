import numpy as np
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
from udakit.errors import ConfigError
from udakit.ndgraph.tape import Context, Function, Var


"""
梯度反转层：前向传播为恒等映射，反向传播将梯度乘以-c。
"""


SCHEDULES = ("constant", "ramp")


def ramp(p: float, gamma: float = 10.0) -> float:
    """
    训练进度上的渐进系数2/(1+exp(-γp)) - 1，p=0时为0，p→∞时趋于1。
    @params:
        p: float 训练进度，位于[0, 1]
        gamma: float 陡峭程度
    @return:
        c: float 系数
    """
    return float(2.0 / (1.0 + np.exp(-gamma * p)) - 1.0)


@dataclass(frozen = True)
class GrlCoefficient:
    value: float = 1.0
    schedule: str = "constant"
    gamma: float = 10.0


    def __post_init__(self) -> None:
        if not np.isfinite(self.value) or self.value < 0:
            raise ConfigError("The reversal coefficient must be finite and non-negative, got %r." % (self.value,))
        if self.schedule not in SCHEDULES:
            raise ConfigError("Unknown reversal schedule '%s', expected one of %s." % (self.schedule, list(SCHEDULES)))
        if self.gamma < 0:
            raise ConfigError("The ramp steepness must be non-negative, got %r." % (self.gamma,))


    def at(self, progress: float) -> float:
        """
        当前训练进度下的系数。
        @params:
            progress: float 训练进度，位于[0, 1]
        @return:
            c: float 反转系数
        """
        if self.schedule == "ramp":
            return self.value * ramp(progress, self.gamma)
        return self.value


    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "schedule": self.schedule, "gamma": self.gamma}


    @classmethod
    def from_dict(cls, d: Optional[Dict[str, Any]]) -> "GrlCoefficient":
        if d is None:
            return cls()
        if isinstance(d, (int, float)):
            return cls(value = float(d))
        return cls(**d)


class GradientReversal(Function):
    name = "grl"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray, coeff: float = 1.0) -> np.ndarray:
        """
        梯度反转层的前向传播函数，值不变。
        @params:
            x: np.ndarray 输入
            coeff: float 反转系数c
        @return:
            y: np.ndarray 与x相同
        """
        ctx.coeff = float(coeff)
        return x


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        """
        梯度反转层的反向传播函数。
        @params:
            grad_output: np.ndarray 输出梯度
        @return:
            grad_input: np.ndarray -c乘以输出梯度
        """
        return (-ctx.coeff * grad_output,)


def grl(x: Var, coeff: GrlCoefficient, progress: float = 0.0) -> Var:
    """
    在x所在的磁带上插入梯度反转层。
    @params:
        x: Var 输入
        coeff: GrlCoefficient 反转系数
        progress: float 训练进度，仅ramp时使用
    @return:
        y: Var 值与x相同
    """
    return GradientReversal.apply(x, coeff = coeff.at(progress))

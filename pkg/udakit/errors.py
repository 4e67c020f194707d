"""
udakit中所有的异常类型。库代码只负责抛出，由命令行入口统一捕获并转换为退出码。
"""


class UdaError(Exception):
    """
    所有udakit异常的基类。
    """
    pass


class ShapeError(UdaError, ValueError):
    """
    张量形状不匹配。
    """
    pass


class ConfigError(UdaError, ValueError):
    """
    配置项非法（取值越界、组合不兼容等）。
    """
    pass


class ContractError(UdaError):
    """
    调用方违反了函数的前置条件。
    """
    pass


class RangeError(UdaError, ValueError):
    """
    标签等离散取值超出允许范围。
    """
    pass


class ParseError(UdaError, ValueError):
    def __init__(self, message: str, row: int = -1, column: str = "") -> None:
        """
        文件解析失败。
        @params:
            message: str 错误信息
            row: int 出错的行号（从1开始，表头为第1行）
            column: str 出错的列名
        """
        super().__init__(message)
        self.row = row
        self.column = column


class NumericError(UdaError, ArithmeticError):
    """
    数值计算失败：前向传播出现非有限值，或SVD未收敛。
    """
    pass


class TrainingError(UdaError):
    def __init__(self, message: str, parameter: str = "") -> None:
        """
        训练步失败（例如梯度中出现非有限值）。
        @params:
            message: str 错误信息
            parameter: str 出错的参数张量名
        """
        super().__init__(message)
        self.parameter = parameter

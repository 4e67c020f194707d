import numpy as np
from scipy.special import expit
from typing import Any, Optional, Tuple
from udakit.errors import ShapeError
from udakit.ndgraph.tape import Context, Function


"""
计算图的原语集合。每个原语都给出前向值与解析的反向传播。
"""


LOG_FLOOR = 1e-12


def check_same_shape(name: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError("Operands of '%s' must have equal shapes, got %s and %s." % (name, a.shape, b.shape))


class MatMul(Function):
    name = "matmul"


    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """
        矩阵乘法。
        @params:
            a: np.ndarray 形状为[m, k]
            b: np.ndarray 形状为[k, n]
        @return:
            y: np.ndarray 形状为[m, n]
        """
        if a.shape[1] != b.shape[0]:
            raise ShapeError("Can't multiply a %dx%d matrix by a %dx%d matrix." % (a.shape[0], a.shape[1], b.shape[0], b.shape[1]))
        ctx.save_for_backward(a, b)
        return a @ b


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        a, b = ctx.saved_arrays
        grad_a = grad_output @ b.T if ctx.needs_input_grad[0] else None
        grad_b = a.T @ grad_output if ctx.needs_input_grad[1] else None
        return grad_a, grad_b


class Transpose(Function):
    name = "transpose"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(x.T)


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.ascontiguousarray(grad_output.T),)


class Add(Function):
    name = "add"


    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        check_same_shape("add", a, b)
        return a + b


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad_output, grad_output


class Sub(Function):
    name = "sub"


    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        check_same_shape("sub", a, b)
        return a - b


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return grad_output, -grad_output


class Mul(Function):
    name = "mul"


    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        check_same_shape("mul", a, b)
        ctx.save_for_backward(a, b)
        return a * b


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        a, b = ctx.saved_arrays
        return grad_output * b, grad_output * a


class Scale(Function):
    name = "scale"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray, factor: float = 1.0) -> np.ndarray:
        """
        乘以一个标量常数（唯一允许的广播）。
        """
        ctx.factor = float(factor)
        return x * ctx.factor


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (grad_output * ctx.factor,)


class Relu(Function):
    name = "relu"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save_for_backward(x)
        return np.maximum(x, 0.0)


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        x = ctx.saved_arrays[0]
        return (grad_output * (x > 0.0),)


class Exp(Function):
    name = "exp"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        with np.errstate(over = "ignore"):
            y = np.exp(x)
        ctx.save_for_backward(y)
        return y


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        y = ctx.saved_arrays[0]
        return (grad_output * y,)


class LogClamped(Function):
    name = "log_clamped"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        """
        截断对数ln(max(x, 1e-12))，在截断处梯度为零。
        """
        ctx.save_for_backward(x)
        return np.log(np.maximum(x, LOG_FLOOR))


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        x = ctx.saved_arrays[0]
        live = x > LOG_FLOOR
        return (np.where(live, grad_output / np.where(live, x, 1.0), 0.0),)


class Sigmoid(Function):
    name = "sigmoid"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        y = expit(x)
        ctx.save_for_backward(y)
        return y


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        y = ctx.saved_arrays[0]
        return (grad_output * y * (1.0 - y),)


class Clip(Function):
    name = "clip"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """
        截断到[low, high]，区间之外梯度为零。
        """
        ctx.save_for_backward(x)
        ctx.low = low
        ctx.high = high
        return np.clip(x, low, high)


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        x = ctx.saved_arrays[0]
        inside = (x >= ctx.low) & (x <= ctx.high)
        return (grad_output * inside,)


class SoftmaxRows(Function):
    name = "softmax_rows"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        """
        逐行softmax，先减去每行最大值以避免溢出。
        """
        z = x - np.max(x, axis = 1, keepdims = True)
        e = np.exp(z)
        y = e / np.sum(e, axis = 1, keepdims = True)
        ctx.save_for_backward(y)
        return y


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        y = ctx.saved_arrays[0]
        inner = np.sum(grad_output * y, axis = 1, keepdims = True)
        return (y * (grad_output - inner),)


class LogSoftmaxRows(Function):
    name = "log_softmax_rows"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        z = x - np.max(x, axis = 1, keepdims = True)
        y = z - np.log(np.sum(np.exp(z), axis = 1, keepdims = True))
        ctx.save_for_backward(y)
        return y


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        y = ctx.saved_arrays[0]
        return (grad_output - np.exp(y) * np.sum(grad_output, axis = 1, keepdims = True),)


class Sum(Function):
    name = "sum"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.shape = x.shape
        return np.array([[np.sum(x)]])


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (np.full(ctx.shape, grad_output[0, 0]),)


class Mean(Function):
    name = "mean"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.shape = x.shape
        return np.array([[np.mean(x)]])


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        n = ctx.shape[0] * ctx.shape[1]
        return (np.full(ctx.shape, grad_output[0, 0] / n),)


class FrobeniusSq(Function):
    name = "frobenius_sq"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save_for_backward(x)
        return np.array([[np.sum(x * x)]])


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        x = ctx.saved_arrays[0]
        return (2.0 * grad_output[0, 0] * x,)


class StopGradient(Function):
    name = "stop_gradient"
    differentiable = False


    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        return x


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return (None,)


class TakeRows(Function):
    name = "take_rows"


    @staticmethod
    def forward(ctx: Context, x: np.ndarray, index: Any = ()) -> np.ndarray:
        """
        按下标取出若干行（允许重复）。
        """
        idx = np.asarray(index, dtype = np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
            raise ShapeError("Row index out of range for a tensor with %d rows." % (x.shape[0],))
        ctx.index = idx
        ctx.shape = x.shape
        return x[idx].reshape(idx.size, x.shape[1])


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        grad = np.zeros(ctx.shape)
        np.add.at(grad, ctx.index, grad_output)
        return (grad,)


class ConcatRows(Function):
    name = "concat_rows"


    @staticmethod
    def forward(ctx: Context, *xs: np.ndarray) -> np.ndarray:
        cols = {x.shape[1] for x in xs}
        if len(cols) != 1:
            raise ShapeError("Can't stack rows with different column counts %s." % (sorted(cols),))
        ctx.splits = np.cumsum([x.shape[0] for x in xs])[:-1]
        return np.vstack(xs)


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        return tuple(np.ascontiguousarray(g) for g in np.split(grad_output, ctx.splits, axis = 0))

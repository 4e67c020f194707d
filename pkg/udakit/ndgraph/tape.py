import numpy as np
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, Union
from udakit.errors import ContractError, NumericError, ShapeError
from udakit.ndgraph.tensor import Tensor


"""
反向模式自动微分的计算图（磁带）。
磁带按拓扑顺序记录结点：父结点的编号总是严格小于子结点。一条磁带只归一个执行线程所有。
"""


class Context:
    def __init__(self) -> None:
        """
        前向传播时保存反向传播所需信息的上下文，用法同torch.autograd.Function中的ctx。
        """
        self.saved_arrays: Tuple[np.ndarray, ...] = ()
        self.needs_input_grad: Tuple[bool, ...] = ()


    def save_for_backward(self, *arrays: np.ndarray) -> None:
        """
        保存反向传播所需的前向值。
        @params:
            *arrays: np.ndarray 需要保存的数组
        """
        self.saved_arrays = arrays


class Function:
    """
    计算图上的原语。子类实现静态方法forward与backward：
    forward(ctx, *inputs, **kwargs)接收各输入的数组，返回输出数组；
    backward(ctx, grad_output)返回与输入一一对应的梯度（不需要梯度时为None）。
    """
    name = "function"
    differentiable = True


    @staticmethod
    def forward(ctx: Context, *inputs: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError


    @staticmethod
    def backward(ctx: Context, grad_output: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


    @classmethod
    def apply(cls, *args: Any, **kwargs: Any) -> "Var":
        """
        在输入所在的磁带上执行并记录该原语。
        @params:
            *args: Var | Tensor | np.ndarray 输入，非Var的输入作为常量记录
            **kwargs: 原语的非张量参数
        @return:
            y: Var 输出结点
        """
        tape = find_tape(args)
        inputs = [tape.as_var(a) for a in args]
        ctx = Context()
        ctx.needs_input_grad = tuple(tape.nodes[v.index].requires_grad for v in inputs)
        out = cls.forward(ctx, *[v.value.data for v in inputs], **kwargs)
        if not np.all(np.isfinite(out)):
            raise NumericError("Forward pass of '%s' produced a non-finite value." % (cls.name,))
        requires_grad = cls.differentiable and any(ctx.needs_input_grad)
        return tape.record(cls, tuple(v.index for v in inputs), ctx, Tensor.wrap(out), requires_grad)


class Node:
    __slots__ = ("op", "parents", "ctx", "value", "requires_grad", "name")


    def __init__(self, op: Optional[Type[Function]], parents: Tuple[int, ...], ctx: Optional[Context], value: Tensor, requires_grad: bool, name: str = "") -> None:
        """
        磁带上的一个结点。
        @params:
            op: Type[Function] | None 产生该结点的原语，叶结点为None
            parents: Tuple[int] 父结点编号
            ctx: Context | None 前向传播保存的上下文
            value: Tensor 前向值
            requires_grad: bool 是否需要回传梯度
            name: str 参数名（仅参数叶结点）
        """
        self.op = op
        self.parents = parents
        self.ctx = ctx
        self.value = value
        self.requires_grad = requires_grad
        self.name = name


class Var:
    __slots__ = ("tape", "index")


    def __init__(self, tape: "Tape", index: int) -> None:
        """
        指向磁带上某个结点的句柄。
        @params:
            tape: Tape 所在磁带
            index: int 结点编号
        """
        self.tape = tape
        self.index = index


    @property
    def value(self) -> Tensor:
        return self.tape.nodes[self.index].value


    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape


    @property
    def requires_grad(self) -> bool:
        return self.tape.nodes[self.index].requires_grad


    def item(self) -> float:
        return self.value.item()


    def __add__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        return function.Add.apply(self, other)


    def __radd__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        return function.Add.apply(other, self)


    def __sub__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        return function.Sub.apply(self, other)


    def __rsub__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        return function.Sub.apply(other, self)


    def __mul__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        if isinstance(other, (int, float)):
            return function.Scale.apply(self, factor = float(other))
        return function.Mul.apply(self, other)


    def __rmul__(self, other: Any) -> "Var":
        return self.__mul__(other)


    def __neg__(self) -> "Var":
        from udakit.ndgraph import function
        return function.Scale.apply(self, factor = -1.0)


    def __matmul__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        return function.MatMul.apply(self, other)


    def __rmatmul__(self, other: Any) -> "Var":
        from udakit.ndgraph import function
        return function.MatMul.apply(other, self)


    @property
    def T(self) -> "Var":
        from udakit.ndgraph import function
        return function.Transpose.apply(self)


    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        op_name = node.op.name if node.op is not None else "leaf"
        return "Var(index=%d, op=%s, shape=%s)" % (self.index, op_name, self.shape)


def find_tape(args: Sequence[Any]) -> "Tape":
    """
    在输入中寻找所在的磁带。
    @params:
        args: Sequence 原语的输入
    @return:
        tape: Tape 第一个Var所在的磁带
    """
    for a in args:
        if isinstance(a, Var):
            return a.tape
    raise ContractError("At least one input must live on a tape; wrap values with tape.leaf() or tape.constant().")


class Gradients:
    def __init__(self, tape: "Tape", slots: List[Optional[np.ndarray]]) -> None:
        """
        一次反向传播得到的梯度，与磁带上的结点一一对应。
        @params:
            tape: Tape 磁带
            slots: List[np.ndarray | None] 各结点的梯度，None代表梯度为零
        """
        self.tape = tape
        self.slots = slots


    def __getitem__(self, var: Var) -> np.ndarray:
        """
        取出某个结点的梯度，未被触及的结点返回全零。
        @params:
            var: Var 结点
        @return:
            grad: np.ndarray 梯度，形状与结点的值相同
        """
        if var.tape is not self.tape:
            raise ContractError("The variable belongs to a different tape.")
        g = self.slots[var.index] if var.index < len(self.slots) else None
        if g is None:
            return np.zeros(var.shape)
        return g


    def parameters(self) -> Dict[str, np.ndarray]:
        """
        按名称导出所有参数叶结点的梯度。
        @return:
            grads: Dict[str, np.ndarray] 参数名到梯度的映射
        """
        return {name: self[Var(self.tape, index)] for name, index in self.tape.parameters.items()}


class Tape:
    def __init__(self) -> None:
        """
        计算图的磁带。
        """
        self.nodes: List[Node] = []
        self.parameters: Dict[str, int] = {}


    def __len__(self) -> int:
        return len(self.nodes)


    def record(self, op: Optional[Type[Function]], parents: Tuple[int, ...], ctx: Optional[Context], value: Tensor, requires_grad: bool, name: str = "") -> Var:
        """
        追加一个结点。
        @return:
            v: Var 新结点
        """
        for p in parents:
            assert 0 <= p < len(self.nodes), "Parent node %d is not on the tape yet." % (p,)
        self.nodes.append(Node(op, parents, ctx, value, requires_grad, name))
        return Var(self, len(self.nodes) - 1)


    def leaf(self, value: Union[Tensor, Any], requires_grad: bool = True, name: str = "") -> Var:
        """
        记录一个叶结点。
        @params:
            value: Tensor | array_like 值
            requires_grad: bool 是否对其求梯度
            name: str 结点名
        @return:
            v: Var 叶结点
        """
        if not isinstance(value, Tensor):
            value = Tensor(value)
        if not value.is_finite():
            raise NumericError("Leaf '%s' holds a non-finite value." % (name,))
        return self.record(None, (), None, value, requires_grad, name)


    def constant(self, value: Union[Tensor, Any]) -> Var:
        """
        记录一个不需要梯度的常量。
        """
        return self.leaf(value, requires_grad = False)


    def parameter(self, name: str, value: Tensor) -> Var:
        """
        按名称记录（或复用）一个参数叶结点，同一磁带上同名参数只记录一次。
        @params:
            name: str 参数名
            value: Tensor 参数值
        @return:
            v: Var 参数叶结点
        """
        if name in self.parameters:
            return Var(self, self.parameters[name])
        v = self.leaf(value, requires_grad = True, name = name)
        self.parameters[name] = v.index
        return v


    def bind_parameter(self, name: str, var: Var) -> None:
        """
        把已有的叶结点登记为参数name，此后parameter(name, ...)返回该结点。
        """
        if var.tape is not self:
            raise ContractError("Can't bind a variable from a different tape.")
        if name in self.parameters and self.parameters[name] != var.index:
            raise ContractError("Parameter '%s' is already on the tape." % (name,))
        self.parameters[name] = var.index


    def as_var(self, x: Any) -> Var:
        """
        把输入转换为本磁带上的结点，非Var的输入记为常量。
        """
        if isinstance(x, Var):
            if x.tape is not self:
                raise ContractError("Can't mix variables from different tapes.")
            return x
        return self.constant(x)


    def backward(self, loss: Var) -> Gradients:
        """
        从标量损失出发，按逆拓扑顺序累加梯度。磁带本身不被修改，可以重复调用。
        @params:
            loss: Var 1×1的损失结点
        @return:
            grads: Gradients 各结点的梯度
        """
        if loss.tape is not self:
            raise ContractError("The loss belongs to a different tape.")
        if loss.shape != (1, 1):
            raise ContractError("Can't differentiate a non-scalar loss of shape %s." % (loss.shape,))
        slots: List[Optional[np.ndarray]] = [None] * (loss.index + 1)
        slots[loss.index] = np.ones((1, 1))
        for i in range(loss.index, -1, -1):
            g = slots[i]
            node = self.nodes[i]
            if g is None or node.op is None or not node.requires_grad:
                continue
            parent_grads = node.op.backward(node.ctx, g)
            for p, pg in zip(node.parents, parent_grads):
                if pg is None or not self.nodes[p].requires_grad:
                    continue
                if pg.shape != self.nodes[p].value.shape:
                    raise ShapeError("Backward of '%s' produced a gradient of shape %s for an input of shape %s." % (node.op.name, pg.shape, self.nodes[p].value.shape))
                slots[p] = pg if slots[p] is None else slots[p] + pg
        return Gradients(self, slots)

from .tensor import Tensor
from .tape import Context, Function, Gradients, Tape, Var
from .ops import backward, clip, concat_rows, elementwise, exp, log_clamped, log_softmax_rows, matmul, reduce, relu, scale, sigmoid, softmax_rows, stop_gradient, take_rows, transpose
from .gradcheck import GradCheckReport, check_gradients, kink_margin, numeric_gradient

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from udakit.errors import ConfigError, ContractError, NumericError, ShapeError
from udakit.ndgraph import Tape, Tensor, check_gradients, kink_margin, ops
from udakit.ndgraph.gradcheck import relative_error


def test_tensor_is_immutable_and_2d():
    t = Tensor([1.0, 2.0, 3.0])
    assert t.shape == (1, 3)
    assert Tensor(4.0).shape == (1, 1)
    with pytest.raises(ValueError):
        t.data[0, 0] = 5.0
    copy = t.numpy()
    copy[0, 0] = 5.0
    assert t.data[0, 0] == 1.0
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2, 2)))


def test_tensor_item_needs_1x1():
    assert Tensor([[2.5]]).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor([[1.0, 2.0]]).item()


def test_matmul_shape_mismatch():
    tape = Tape()
    a = tape.leaf(np.ones((2, 3)))
    b = tape.leaf(np.ones((2, 3)))
    with pytest.raises(ShapeError, match = "Can't multiply a 2x3 matrix by a 2x3 matrix"):
        ops.matmul(a, b)


def test_elementwise_shape_mismatch():
    tape = Tape()
    with pytest.raises(ShapeError):
        tape.leaf(np.ones((2, 3))) + tape.leaf(np.ones((3, 2)))


def test_unknown_ops_are_config_errors():
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ConfigError):
        ops.reduce("max", x)
    with pytest.raises(ConfigError):
        ops.elementwise("tanh", x)


def test_backward_needs_scalar():
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        tape.backward(x * x)


def test_non_finite_forward_raises():
    tape = Tape()
    x = tape.leaf(np.array([[1000.0]]))
    with pytest.raises(NumericError):
        ops.exp(x)


def test_variables_from_two_tapes_dont_mix():
    a = Tape().leaf(np.ones((1, 1)))
    b = Tape().leaf(np.ones((1, 1)))
    with pytest.raises(ContractError):
        a + b


def test_gradient_of_quadratic_form():
    rng = np.random.default_rng(0)
    a = rng.normal(size = (3, 3))
    x = rng.normal(size = (3, 1))
    tape = Tape()
    av = tape.constant(a)
    xv = tape.leaf(x)
    loss = ops.matmul(ops.matmul(xv.T, av), xv)
    grads = tape.backward(loss)
    assert_allclose(grads[xv], (a + a.T) @ x, rtol = 1e-12)


def test_shared_subexpression_accumulates():
    tape = Tape()
    x = tape.leaf(np.array([[3.0]]))
    y = x * x + x
    grads = tape.backward(ops.reduce("sum", y))
    assert grads[x][0, 0] == pytest.approx(7.0)


def test_constants_get_zero_gradient():
    tape = Tape()
    x = tape.leaf(np.ones((2, 2)))
    c = tape.constant(np.full((2, 2), 3.0))
    grads = tape.backward(ops.reduce("sum", x * c))
    assert_allclose(grads[x], np.full((2, 2), 3.0))
    assert_allclose(grads[c], np.zeros((2, 2)))


def test_backward_is_repeatable():
    tape = Tape()
    x = tape.leaf(np.array([[0.3, -1.2]]))
    loss = ops.reduce("sum", ops.sigmoid(x))
    first = tape.backward(loss)[x]
    second = tape.backward(loss)[x]
    assert np.array_equal(first, second)


def test_stop_gradient_blocks_flow():
    tape = Tape()
    x = tape.leaf(np.array([[2.0]]))
    loss = ops.reduce("sum", x * ops.stop_gradient(x))
    assert tape.backward(loss)[x][0, 0] == pytest.approx(2.0)


def test_log_clamped_floor_has_zero_gradient():
    tape = Tape()
    x = tape.leaf(np.array([[0.0, 1e-20, 0.5]]))
    y = ops.log_clamped(x)
    assert y.value.data[0, 0] == pytest.approx(np.log(1e-12))
    g = tape.backward(ops.reduce("sum", y))[x]
    assert g[0, 0] == 0.0 and g[0, 1] == 0.0
    assert g[0, 2] == pytest.approx(2.0)


def test_softmax_rows_are_stable_and_normalized():
    tape = Tape()
    x = tape.leaf(np.array([[1000.0, 1000.0], [-1000.0, 0.0]]))
    p = ops.softmax_rows(x).value.data
    assert_allclose(p.sum(axis = 1), [1.0, 1.0])
    assert_allclose(p[0], [0.5, 0.5])
    log_p = ops.log_softmax_rows(x).value.data
    assert np.all(np.isfinite(log_p))


def test_take_and_concat_rows_backward():
    tape = Tape()
    x = tape.leaf(np.arange(6.0).reshape(3, 2))
    y = tape.leaf(np.ones((1, 2)))
    picked = ops.take_rows(x, [0, 0, 2])
    both = ops.concat_rows(picked, y)
    assert both.shape == (4, 2)
    grads = tape.backward(ops.reduce("sum", both))
    assert_allclose(grads[x], [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])
    assert_allclose(grads[y], [[1.0, 1.0]])


def test_bind_parameter_reuses_leaf():
    tape = Tape()
    leaf = tape.leaf(np.ones((2, 2)), name = "w")
    tape.bind_parameter("w", leaf)
    assert tape.parameter("w", Tensor(np.zeros((2, 2)))).index == leaf.index
    other = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        tape.bind_parameter("w", other)


def test_kink_margin_sees_relu_inputs():
    tape = Tape()
    x = tape.leaf(np.array([[0.5, -0.002]]))
    ops.relu(x)
    assert kink_margin(tape) == pytest.approx(0.002)
    assert kink_margin(Tape()) == np.inf


def test_relative_error_formula():
    err = relative_error(np.array([10.0, 0.1]), np.array([10.5, 0.2]))
    assert_allclose(err, [0.05, 0.1])


@given(st.lists(st.floats(-3.0, 3.0), min_size = 6, max_size = 6))
def test_sigmoid_gradient_matches_finite_differences(values):
    x = np.array(values).reshape(2, 3)
    report = check_gradients("sigmoid", lambda tape, v: ops.reduce("sum", ops.sigmoid(v["x"])), {"x": x})
    assert report.passed, str(report)


def test_check_gradients_detects_wrong_backward():
    report = check_gradients("grl", lambda tape, v: ops.reduce("sum", -1.0 * v["x"]), {"x": np.ones((2, 2))}, numeric = lambda key, p: float(np.sum(p["x"])))
    assert not report.passed
    assert report.max_error == pytest.approx(2.0)


import numpy as np
import pytest

from unitnorm.core.exceptions import NonFiniteError, ShapeError, TensorError
from unitnorm.tensor import ops
from unitnorm.tensor.gradcheck import check_gradient
from unitnorm.tensor.tensor import (
    Tensor, as_tensor, get_default_dtype, is_grad_enabled, no_grad, precision)


def test_tensor_repr_and_shape():
    x = Tensor([[1, 2, 3], [4, 5, 6]])
    assert "<unitnorm.tensor.tensor.Tensor: shape=(2, 3)" in repr(x)
    assert x.shape == (2, 3)
    assert x.size == 6
    assert x.ndim == 2
    assert x.dtype == np.float32
    assert len(x) == 2
    assert x.is_leaf


def test_precision_context():
    assert get_default_dtype() is np.float32
    with precision(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


def test_no_grad_context():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with no_grad():
        assert not is_grad_enabled()
        y = x * 2
    assert is_grad_enabled()
    assert not y.requires_grad


def test_as_tensor():
    x = Tensor([1.0])
    assert as_tensor(x) is x
    assert isinstance(as_tensor([1.0, 2.0]), Tensor)


def test_item():
    assert Tensor([[3.5]]).item() == 3.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_backward_sum():
    x = Tensor([[1.0, -2.0], [3.0, 4.0]], requires_grad=True)
    ops.sum(x).backward()
    assert np.array_equal(x.grad, np.ones((2, 2)))


def test_backward_square():
    x = Tensor([1.0, -2.0, 0.5], requires_grad=True)
    ops.sum(x * x).backward()
    assert np.allclose(x.grad, 2 * x.data)


def test_backward_accumulates_shared_node():
    x = Tensor([2.0], requires_grad=True)
    y = x * 3
    (y + y).sum().backward()
    assert np.allclose(x.grad, [6.0])


def test_backward_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2).backward()


def test_backward_releases_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = ops.sum(x * x)
    loss.backward()
    with pytest.raises(TensorError):
        loss.backward()


def test_backward_reused_intermediate_after_release():
    x = Tensor([1.0, 2.0], requires_grad=True)
    hidden = x * x
    ops.sum(hidden).backward()
    with pytest.raises(TensorError):
        ops.sum(hidden * 2).backward()


def test_backward_without_grad_inputs():
    with pytest.raises(TensorError):
        ops.sum(Tensor([1.0])).backward()


def test_backward_unreached_leaf_gets_zeros():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0, 4.0], requires_grad=True)
    loss = ops.sum(x) + ops.sum(y * 0)
    loss.backward()
    assert np.array_equal(y.grad, np.zeros(2))


def test_non_finite_forward():
    x = Tensor([0.0, 1.0])
    with pytest.raises(NonFiniteError):
        ops.log(x)
    with pytest.raises(FloatingPointError):
        ops.div(Tensor([1.0]), Tensor([0.0]))


def test_ndarray_on_left_dispatches_to_tensor():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = np.array([3.0, 4.0]) * x
    assert isinstance(y, Tensor)
    ops.sum(y).backward()
    assert np.allclose(x.grad, [3.0, 4.0])


def test_composite_mlp_gradient():
    rng = np.random.default_rng(3)
    target = rng.uniform(-1, 1, size=(4, 2))

    def loss(t):
        hidden = ops.tanh(ops.matmul(t[0], t[1]) + t[2])
        return ops.mse(ops.matmul(hidden, t[3]), target)

    result = check_gradient(loss, [
        rng.uniform(-1, 1, size=(4, 3)), rng.uniform(-1, 1, size=(3, 5)),
        rng.uniform(-1, 1, size=(5,)), rng.uniform(-1, 1, size=(5, 2))])
    assert result.ok, result

"""
Module :module:`unitnorm.tensor.tensor` provides dense tensor with
reverse-mode automatic differentiation.

Every operation on tensors which require gradient records its inputs
and a backward function into the result, the chain of results forms
the computation tape. :meth:`Tensor.backward` walks the tape once in
reverse topological order, accumulates gradients into leaf tensors and
releases the tape, so a second backward through the same graph raises
:exc:`unitnorm.core.exceptions.TensorError`.
"""

import contextlib
import threading

import numpy as np

from unitnorm.core.exceptions import NonFiniteError, ShapeError, TensorError

__all__ = [
    'Tensor', 'as_tensor', 'no_grad', 'is_grad_enabled', 'precision',
    'get_default_dtype', 'make_result',
]

_state = threading.local()


def is_grad_enabled():
    """
    :const:`True` when operations record the computation tape.
    """
    return getattr(_state, 'grad_enabled', True)


@contextlib.contextmanager
def no_grad():
    """
    Context manager which disables recording of the computation tape,
    used for inference and for frozen models.
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def get_default_dtype():
    """
    Floating point type of the newly created tensors, 32-bit unless
    changed by :func:`precision`.
    """
    return getattr(_state, 'dtype', np.float32)


@contextlib.contextmanager
def precision(dtype):
    """
    Context manager which changes the default floating point type,
    e.g. ``with precision(np.float64)`` for finite-difference checks.
    """
    previous = get_default_dtype()
    _state.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _state.dtype = previous


class Tensor(object):
    """
    Dense real-valued tensor. *data* is anything convertible into
    :class:`numpy.ndarray`, it is stored row-major in the default floating
    point type. If *requires_grad* is :const:`True`, gradient of a scalar
    loss is accumulated into :attr:`grad` by :meth:`backward`.
    """

    # Let ``ndarray <op> Tensor`` dispatch to the Tensor's reflected method.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.array(data, dtype=dtype or get_default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._op = None
        self._released = False

    def __repr__(self):
        return "<{}.{}: shape={}, requires_grad={}>".format(
            self.__class__.__module__, self.__class__.__name__,
            self.shape, self.requires_grad)

    def __len__(self):
        return len(self.data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        """
        :const:`True` when tensor was not produced by a recorded operation.
        """
        return self._backward is None and not self._released

    def numpy(self):
        """
        Return underlying :class:`numpy.ndarray`.
        """
        return self.data

    def item(self):
        """
        Return value of single-element tensor as :class:`float`.
        """
        if self.data.size != 1:
            raise ShapeError(
                "Only single-element tensor can be converted to a scalar, "
                "shape is %s" % (self.shape,))
        return float(self.data.reshape(()))

    def detach(self):
        """
        Return new leaf tensor sharing data, without gradient tracking.
        """
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def _topological_order(self):
        """
        Return tensors of the graph ending at this tensor, inputs before
        outputs. Iterative depth-first search, graph depth is unbounded.
        """
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self):
        """
        Compute gradient of this scalar tensor with respect to every leaf
        tensor of the graph which requires gradient. Gradients are added to
        the existing :attr:`grad` of the leaves. The tape is released.
        """
        if self.data.size != 1:
            raise ShapeError(
                "backward() requires scalar loss, shape is %s" % (self.shape,))
        if self._released:
            raise TensorError("Computation tape has already been released")
        if not self.requires_grad:
            raise TensorError("Loss does not depend on any tensor which "
                              "requires gradient")

        order = self._topological_order()
        if any(node._released for node in order):
            raise TensorError("Graph contains an intermediate result whose "
                              "tape has already been released")
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if node._backward is None:
                if grad is None:
                    grad = np.zeros_like(node.data)
                if node.grad is None:
                    node.grad = np.array(grad, dtype=node.data.dtype)
                else:
                    node.grad = node.grad + grad
                continue
            if grad is None:
                continue
            parent_grads = node._backward(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if parent_grad.shape != parent.data.shape:
                    raise ShapeError(
                        "Gradient of '%s' has shape %s, expected %s" % (
                            node._op, parent_grad.shape, parent.data.shape))
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad

        for node in order:
            if node._backward is not None:
                node._parents = ()
                node._backward = None
                node._released = True

    # Operators, implemented in :mod:`unitnorm.tensor.ops`.

    def __add__(self, other):
        return ops.add(self, other)

    def __radd__(self, other):
        return ops.add(other, self)

    def __sub__(self, other):
        return ops.sub(self, other)

    def __rsub__(self, other):
        return ops.sub(other, self)

    def __mul__(self, other):
        return ops.mul(self, other)

    def __rmul__(self, other):
        return ops.mul(other, self)

    def __truediv__(self, other):
        return ops.div(self, other)

    def __rtruediv__(self, other):
        return ops.div(other, self)

    def __neg__(self):
        return ops.neg(self)

    def __pow__(self, exponent):
        return ops.power(self, exponent)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        return ops.matmul(other, self)

    def __getitem__(self, index):
        return ops.getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def exp(self):
        return ops.exp(self)

    def log(self):
        return ops.log(self)


def as_tensor(value, dtype=None):
    """
    Return *value* if it is a :class:`Tensor`, else wrap it into a new
    constant tensor of *dtype* (default floating point type if not set).
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


def make_result(data, parents, backward, op):
    """
    Wrap output *data* of operation *op* into a tensor. If gradient
    recording is enabled and any of *parents* requires gradient, the
    result remembers *parents* and *backward*, a function which maps the
    output gradient onto a tuple of gradients aligned with *parents*.
    Raise :exc:`NonFiniteError` when *data* contains NaN or infinity.
    """
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("Operation '%s' produced non-finite values" % op)
    result = Tensor.__new__(Tensor)
    result.data = np.asarray(data)
    result.grad = None
    result._op = op
    result._released = False
    requires_grad = is_grad_enabled() and any(
        parent.requires_grad for parent in parents)
    result.requires_grad = requires_grad
    if requires_grad:
        result._parents = tuple(parents)
        result._backward = backward
    else:
        result._parents = ()
        result._backward = None
    return result


from unitnorm.tensor import ops  # noqa: E402  (operators above call into it)

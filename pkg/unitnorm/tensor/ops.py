"""
Differentiable primitives of the tensor library. Every function takes
:class:`unitnorm.tensor.tensor.Tensor` (or anything convertible into it)
and returns a new tensor which records its backward function when any
input requires gradient.
"""

import math

import numpy as np

from unitnorm.core.exceptions import ShapeError
from unitnorm.tensor.tensor import Tensor, make_result

__all__ = [
    'add', 'sub', 'mul', 'div', 'neg', 'power', 'exp', 'log', 'sqrt',
    'tanh', 'sigmoid', 'sin', 'cos', 'relu', 'gelu', 'matmul', 'sum',
    'mean', 'reshape', 'transpose', 'getitem', 'concat', 'stack', 'where',
    'masked_fill', 'clamp', 'softmax', 'log_softmax', 'layer_norm',
    'embedding', 'conv1d', 'mean_pool', 'dropout', 'sinusoidal_encoding',
    'cross_entropy', 'mse',
]


def _pair(a, b):
    """
    Convert operands of binary operation into tensors. Constant operand
    takes floating point type of the tensor one.
    """
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        return a, b
    if isinstance(a, Tensor):
        return a, Tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor):
        return Tensor(a, dtype=b.dtype), b
    return Tensor(a), Tensor(b)


def _tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad, shape):
    """
    Sum *grad* over axes which were broadcast to reach its shape from
    *shape*.
    """
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError("Operands of '%s' have incompatible shapes %s and %s"
                         % (op, a.shape, b.shape))


def _normalize_axis(axis, ndim):
    if axis < -ndim or axis >= ndim:
        raise ShapeError("Axis %d is out of range for tensor of rank %d"
                         % (axis, ndim))
    return axis % ndim


# Elementwise arithmetic

def add(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'add')
    out = a.data + b.data

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)
    return make_result(out, (a, b), backward, 'add')


def sub(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'sub')
    out = a.data - b.data

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)
    return make_result(out, (a, b), backward, 'sub')


def mul(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'mul')
    out = a.data * b.data

    def backward(grad):
        return (_unbroadcast(grad * b.data, a.shape),
                _unbroadcast(grad * a.data, b.shape))
    return make_result(out, (a, b), backward, 'mul')


def div(a, b):
    a, b = _pair(a, b)
    _broadcast_shape(a, b, 'div')
    with np.errstate(divide='ignore', invalid='ignore'):
        out = a.data / b.data

    def backward(grad):
        return (_unbroadcast(grad / b.data, a.shape),
                _unbroadcast(-grad * a.data / (b.data * b.data), b.shape))
    return make_result(out, (a, b), backward, 'div')


def neg(a):
    a = _tensor(a)

    def backward(grad):
        return (-grad,)
    return make_result(-a.data, (a,), backward, 'neg')


def power(a, exponent):
    """
    Raise *a* to constant real *exponent*.
    """
    a = _tensor(a)
    exponent = float(exponent)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.power(a.data, exponent).astype(a.dtype)

    def backward(grad):
        return (grad * exponent * np.power(a.data, exponent - 1.0),)
    return make_result(out, (a,), backward, 'power')


# Elementwise functions

def exp(a):
    a = _tensor(a)
    with np.errstate(over='ignore'):
        out = np.exp(a.data)

    def backward(grad):
        return (grad * out,)
    return make_result(out, (a,), backward, 'exp')


def log(a):
    a = _tensor(a)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.log(a.data)

    def backward(grad):
        return (grad / a.data,)
    return make_result(out, (a,), backward, 'log')


def sqrt(a):
    a = _tensor(a)
    with np.errstate(invalid='ignore'):
        out = np.sqrt(a.data)

    def backward(grad):
        return (grad * 0.5 / out,)
    return make_result(out, (a,), backward, 'sqrt')


def tanh(a):
    a = _tensor(a)
    out = np.tanh(a.data)

    def backward(grad):
        return (grad * (1.0 - out * out),)
    return make_result(out, (a,), backward, 'tanh')


def sigmoid(a):
    a = _tensor(a)
    out = (0.5 * (np.tanh(0.5 * a.data) + 1.0)).astype(a.dtype)

    def backward(grad):
        return (grad * out * (1.0 - out),)
    return make_result(out, (a,), backward, 'sigmoid')


def sin(a):
    a = _tensor(a)

    def backward(grad):
        return (grad * np.cos(a.data),)
    return make_result(np.sin(a.data), (a,), backward, 'sin')


def cos(a):
    a = _tensor(a)

    def backward(grad):
        return (-grad * np.sin(a.data),)
    return make_result(np.cos(a.data), (a,), backward, 'cos')


def relu(a):
    a = _tensor(a)
    positive = a.data > 0

    def backward(grad):
        return (grad * positive,)
    return make_result(np.where(positive, a.data, 0).astype(a.dtype),
                       (a,), backward, 'relu')


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    """
    GELU activation, tanh approximation.
    """
    a = _tensor(a)
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = (0.5 * x * (1.0 + t)).astype(a.dtype)

    def backward(grad):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
        return ((grad * local).astype(a.dtype),)
    return make_result(out, (a,), backward, 'gelu')


# Linear algebra and reductions

def matmul(a, b):
    """
    Matrix product of the last two axes, leading axes broadcast. A 1-D
    operand is not promoted, both operands must have rank >= 2.
    """
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul requires operands of rank >= 2, got %s and %s"
                         % (a.shape, b.shape))
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul inner dimensions differ: %s and %s"
                         % (a.shape, b.shape))
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError("matmul batch dimensions differ: %s and %s"
                         % (a.shape, b.shape))

    def backward(grad):
        grad_a = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)
    return make_result(out, (a, b), backward, 'matmul')


def sum(a, axis=None, keepdims=False):  # noqa: A001
    a = _tensor(a)
    out = np.asarray(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape).astype(a.dtype),)
    return make_result(out, (a,), backward, 'sum')


def mean(a, axis=None, keepdims=False):
    a = _tensor(a)
    out = np.asarray(a.data.mean(axis=axis, keepdims=keepdims))
    count = a.size // max(out.size, 1) if a.size else 1

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return ((np.broadcast_to(grad, a.shape) / count).astype(a.dtype),)
    return make_result(out, (a,), backward, 'mean')


def reshape(a, shape):
    a = _tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("Cannot reshape %s into %s" % (a.shape, shape))

    def backward(grad):
        return (grad.reshape(a.shape),)
    return make_result(out, (a,), backward, 'reshape')


def transpose(a, axes=None):
    a = _tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    out = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def backward(grad):
        return (np.transpose(grad, inverse),)
    return make_result(out, (a,), backward, 'transpose')


def getitem(a, index):
    """
    Basic or advanced indexing, repeated indices accumulate gradient.
    """
    a = _tensor(a)
    if isinstance(index, Tensor):
        index = index.data.astype(np.int64)
    out = np.array(a.data[index])

    def backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, index, grad)
        return (full,)
    return make_result(out, (a,), backward, 'getitem')


def concat(tensors, axis=0):
    tensors = [_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat requires at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError("Cannot concatenate: %s" % e)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, bounds, axis=axis))
    return make_result(out, tensors, backward, 'concat')


def stack(tensors, axis=0):
    tensors = [_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError("Cannot stack: %s" % e)

    def backward(grad):
        return tuple(np.moveaxis(grad, axis, 0))
    return make_result(out, tensors, backward, 'stack')


def where(condition, a, b):
    """
    Select elements of *a* where boolean array *condition* holds and of
    *b* elsewhere.
    """
    a, b = _pair(a, b)
    condition = np.asarray(condition, dtype=bool)
    out = np.where(condition, a.data, b.data)

    def backward(grad):
        return (_unbroadcast(np.where(condition, grad, 0), a.shape),
                _unbroadcast(np.where(condition, 0, grad), b.shape))
    return make_result(out.astype(a.dtype), (a, b), backward, 'where')


def masked_fill(a, mask, value):
    """
    Replace elements of *a* where *mask* holds with constant *value*.
    """
    a = _tensor(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    out = np.where(mask, np.asarray(value, dtype=a.dtype), a.data)

    def backward(grad):
        return (np.where(mask, 0, grad).astype(a.dtype),)
    return make_result(out, (a,), backward, 'masked_fill')


def clamp(a, low=None, high=None):
    a = _tensor(a)
    out = np.clip(a.data, low, high)
    inside = np.ones(a.shape, dtype=bool)
    if low is not None:
        inside &= a.data >= low
    if high is not None:
        inside &= a.data <= high

    def backward(grad):
        return (grad * inside,)
    return make_result(out, (a,), backward, 'clamp')


# Normalizations

def softmax(a, axis=-1):
    a = _tensor(a)
    axis = _normalize_axis(axis, a.ndim)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(grad):
        dot = (grad * out).sum(axis=axis, keepdims=True)
        return (out * (grad - dot),)
    return make_result(out, (a,), backward, 'softmax')


def log_softmax(a, axis=-1):
    a = _tensor(a)
    axis = _normalize_axis(axis, a.ndim)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(grad):
        probs = np.exp(out)
        return (grad - probs * grad.sum(axis=axis, keepdims=True),)
    return make_result(out, (a,), backward, 'log_softmax')


def layer_norm(a, weight, bias, eps=1e-5):
    """
    Normalize the last axis of *a* to zero mean and unit variance, then
    scale by *weight* and shift by *bias* (both of the last axis size).
    """
    a = _tensor(a)
    weight, bias = _tensor(weight), _tensor(bias)
    if weight.shape != a.shape[-1:] or bias.shape != a.shape[-1:]:
        raise ShapeError("layer_norm parameters must have shape %s"
                         % (a.shape[-1:],))
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normed = centered * inv_std
    out = normed * weight.data + bias.data

    def backward(grad):
        g = grad * weight.data
        grad_a = inv_std * (
            g - g.mean(axis=-1, keepdims=True)
            - normed * (g * normed).mean(axis=-1, keepdims=True))
        reduce_axes = tuple(range(grad.ndim - 1))
        grad_w = (grad * normed).sum(axis=reduce_axes)
        grad_b = grad.sum(axis=reduce_axes)
        return grad_a.astype(a.dtype), grad_w, grad_b
    return make_result(out.astype(a.dtype), (a, weight, bias), backward,
                       'layer_norm')


# Sequence primitives

def embedding(weight, ids):
    """
    Look up rows of *weight* (``V x D``) for integer array *ids*.
    """
    weight = _tensor(weight)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise ValueError("Embedding ids must be in [0, %d), got range "
                         "[%d, %d]" % (weight.shape[0], ids.min(), ids.max()))
    out = weight.data[ids]

    def backward(grad):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids.reshape(-1),
                  grad.reshape(-1, weight.shape[1]))
        return (full,)
    return make_result(out, (weight,), backward, 'embedding')


def _conv_geometry(length, kernel_size, stride, dilation, padding):
    span = dilation * (kernel_size - 1) + 1
    padded = length + padding[0] + padding[1]
    if padded < span:
        raise ShapeError("Sequence of length %d is too short for kernel "
                         "spanning %d frames" % (length, span))
    return (padded - span) // stride + 1


def conv1d(x, weight, bias=None, stride=1, dilation=1, padding=(0, 0)):
    """
    1-D convolution over time of channel-last input *x* (``B x L x Cin``)
    with *weight* ``K x Cin x Cout``. *padding* is a pair of zero frames
    prepended and appended. Output is ``B x L' x Cout``.
    """
    x, weight = _tensor(x), _tensor(weight)
    if x.ndim != 3:
        raise ShapeError("conv1d expects input of rank 3, got %s" % (x.shape,))
    if weight.ndim != 3 or weight.shape[1] != x.shape[2]:
        raise ShapeError("conv1d weight %s does not match input channels %d"
                         % (weight.shape, x.shape[2]))
    if isinstance(padding, int):
        padding = (padding, padding)
    kernel_size = weight.shape[0]
    batch, length, _ = x.shape
    out_length = _conv_geometry(length, kernel_size, stride, dilation, padding)
    padded = np.pad(x.data, ((0, 0), tuple(padding), (0, 0)))
    positions = np.arange(out_length) * stride
    taps = []
    for k in range(kernel_size):
        taps.append(padded[:, positions + k * dilation, :])
    out = np.zeros((batch, out_length, weight.shape[2]), dtype=x.dtype)
    for k in range(kernel_size):
        out += taps[k] @ weight.data[k]
    parents = [x, weight]
    if bias is not None:
        bias = _tensor(bias)
        out = out + bias.data
        parents.append(bias)

    def backward(grad):
        grad_padded = np.zeros_like(padded)
        grad_w = np.zeros_like(weight.data)
        for k in range(kernel_size):
            grad_padded[:, positions + k * dilation] += grad @ weight.data[k].T
            grad_w[k] = np.tensordot(taps[k], grad, axes=([0, 1], [0, 1]))
        grad_x = grad_padded[:, padding[0]:padding[0] + length, :]
        grads = [grad_x, grad_w]
        if bias is not None:
            grads.append(grad.sum(axis=(0, 1)))
        return tuple(grads)
    return make_result(out, parents, backward, 'conv1d')


def mean_pool(x, mask=None):
    """
    Average channel-last *x* (``B x L x C``) over time. Only positions
    where boolean *mask* (``B x L``) holds are averaged.
    """
    x = _tensor(x)
    if mask is None:
        mask = np.ones(x.shape[:2], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=1, keepdims=True)
    if np.any(counts == 0):
        raise ValueError("mean_pool mask selects no position in some row")
    weights = (mask / counts).astype(x.dtype)[:, :, None]
    out = (x.data * weights).sum(axis=1)

    def backward(grad):
        return (grad[:, None, :] * weights,)
    return make_result(out, (x,), backward, 'mean_pool')


def dropout(x, p, rng, training=True):
    """
    Inverted dropout: zero elements with probability *p* and scale the
    rest by ``1 / (1 - p)``. Identity when not *training* or ``p == 0``.
    """
    x = _tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError("Dropout probability must be in [0, 1), got %r" % p)
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)

    def backward(grad):
        return (grad * keep,)
    return make_result(x.data * keep, (x,), backward, 'dropout')


def sinusoidal_encoding(positions, dim, dtype=None):
    """
    Sinusoidal encoding of integer or real *positions* into *dim*
    channels, first half sines, second half cosines, geometric frequency
    progression from 1 to 1/10000. Returns a constant tensor
    ``len(positions) x dim``.
    """
    if dim % 2:
        raise ValueError("Encoding dimension must be even, got %d" % dim)
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = positions * freqs[None, :]
    data = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    return Tensor(data, dtype=dtype)


# Losses

def cross_entropy(logits, targets, mask=None, label_smoothing=0.0):
    """
    Mean negative log-likelihood of integer *targets* under *logits*
    (``... x V``), averaged over positions where *mask* holds. With
    *label_smoothing* ``eps`` the target distribution is
    ``(1 - eps) * onehot + eps / V``.
    """
    logits = _tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    vocab = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise ShapeError("Targets of shape %s do not match logits %s"
                         % (targets.shape, logits.shape))
    if not 0.0 <= label_smoothing < 1.0:
        raise ValueError("Label smoothing must be in [0, 1), got %r"
                         % label_smoothing)
    if mask is None:
        mask = np.ones(targets.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("cross_entropy mask selects no position")
    selected = targets[mask]
    if selected.min() < 0 or selected.max() >= vocab:
        raise ValueError("Targets must be in [0, %d), got range [%d, %d]"
                         % (vocab, selected.min(), selected.max()))

    logp = log_softmax(logits, axis=-1)
    safe_targets = np.where(mask, targets, 0)
    nll = -np.take_along_axis(
        logp.data, safe_targets[..., None], axis=-1)[..., 0]
    smooth = -logp.data.mean(axis=-1)
    per_position = (1.0 - label_smoothing) * nll + label_smoothing * smooth
    count = mask.sum()
    out = np.asarray(np.where(mask, per_position, 0).sum() / count,
                     dtype=logits.dtype)

    def backward(grad):
        weight = (mask / count).astype(logits.dtype)[..., None]
        dist = np.full(logp.shape, label_smoothing / vocab,
                       dtype=logits.dtype)
        np.put_along_axis(
            dist, safe_targets[..., None],
            np.take_along_axis(dist, safe_targets[..., None], axis=-1)
            + (1.0 - label_smoothing), axis=-1)
        probs = np.exp(logp.data)
        return (grad * weight * (probs - dist),)
    return make_result(out, (logits,), backward, 'cross_entropy')


def mse(a, b, mask=None):
    """
    Mean squared difference of equally shaped *a* and *b*. With boolean
    *mask* over the leading axes, the mean runs over selected rows and all
    their trailing elements.
    """
    a, b = _pair(a, b)
    if a.shape != b.shape:
        raise ShapeError("mse operands have different shapes %s and %s"
                         % (a.shape, b.shape))
    diff = a.data - b.data
    if mask is None:
        weight = np.ones(a.shape, dtype=a.dtype)
    else:
        mask = np.asarray(mask, dtype=bool)
        extra = a.ndim - mask.ndim
        weight = np.broadcast_to(
            mask.reshape(mask.shape + (1,) * extra), a.shape).astype(a.dtype)
    count = weight.sum()
    if count == 0:
        raise ValueError("mse mask selects no element")
    out = np.asarray((diff * diff * weight).sum() / count, dtype=a.dtype)

    def backward(grad):
        g = grad * 2.0 * diff * weight / count
        return g.astype(a.dtype), (-g).astype(b.dtype)
    return make_result(out, (a, b), backward, 'mse')

"""
Module :module:`unitnorm.tensor.gradcheck` compares analytic gradients
with central finite differences. Checks run in 64-bit precision.
"""

import collections

import numpy as np

from unitnorm.tensor import ops
from unitnorm.tensor.tensor import Tensor, no_grad, precision

__all__ = [
    'GradcheckResult', 'check_gradient', 'check_parameters', 'relative_error',
    'primitive_cases', 'run_cases',
]

GradcheckResult = collections.namedtuple(
    'GradcheckResult', ['name', 'shape', 'max_error', 'checked', 'ok'])

DEFAULT_EPS = 1e-3
DEFAULT_TOLERANCE = 1e-3
ERROR_FLOOR = 1e-2


def relative_error(analytic, numeric, floor=ERROR_FLOOR):
    """
    Elementwise ``|a - n| / max(|a|, |n|, floor)``. The floor keeps
    gradients close to zero from dominating.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def check_gradient(fn, arrays, name='', eps=DEFAULT_EPS,
                   tolerance=DEFAULT_TOLERANCE, max_elements=None, rng=None):
    """
    Check gradient of scalar function *fn* taking a list of tensors.
    *arrays* are the input values, each becomes a 64-bit tensor which
    requires gradient. With *max_elements*, at most that many elements
    per input (chosen by *rng*) are perturbed.
    """
    with precision(np.float64):
        inputs = [Tensor(np.array(a, dtype=np.float64), requires_grad=True)
                  for a in arrays]
        loss = fn(inputs)
        loss.backward()
        analytic = [np.zeros_like(t.data) if t.grad is None else t.grad
                    for t in inputs]

        worst = 0.0
        checked = 0
        for position, tensor in enumerate(inputs):
            flat = tensor.data.reshape(-1)
            indices = np.arange(flat.size)
            if max_elements is not None and flat.size > max_elements:
                rng = rng or np.random.default_rng(0)
                indices = rng.choice(flat.size, size=max_elements,
                                     replace=False)
            for index in indices:
                original = flat[index]
                with no_grad():
                    flat[index] = original + eps
                    plus = fn(inputs).item()
                    flat[index] = original - eps
                    minus = fn(inputs).item()
                flat[index] = original
                numeric = (plus - minus) / (2.0 * eps)
                error = float(relative_error(
                    analytic[position].reshape(-1)[index], numeric))
                worst = max(worst, error)
                checked += 1
    shape = tuple(np.shape(arrays[0])) if arrays else ()
    return GradcheckResult(name, shape, worst, checked, worst < tolerance)


def check_parameters(fn, params, name='', eps=DEFAULT_EPS,
                     tolerance=DEFAULT_TOLERANCE, max_elements=None, rng=None):
    """
    Check gradient of scalar loss *fn* (no arguments) with respect to
    64-bit parameters *params* of a whole model. The loss must be
    deterministic: every call has to draw the same random numbers.
    """
    params = list(params)
    for param in params:
        if param.data.dtype != np.float64:
            raise TypeError("Parameter check needs float64 parameters, "
                            "cast the model with astype() first")
        param.data = np.ascontiguousarray(param.data)
        param.grad = None
    with precision(np.float64):
        fn().backward()
        analytic = [np.zeros_like(p.data) if p.grad is None else p.grad
                    for p in params]
        worst = 0.0
        checked = 0
        for param, grad in zip(params, analytic):
            flat = param.data.reshape(-1)
            indices = np.arange(flat.size)
            if max_elements is not None and flat.size > max_elements:
                rng = rng or np.random.default_rng(0)
                indices = rng.choice(flat.size, size=max_elements,
                                     replace=False)
            for index in indices:
                original = flat[index]
                with no_grad():
                    flat[index] = original + eps
                    plus = fn().item()
                    flat[index] = original - eps
                    minus = fn().item()
                flat[index] = original
                numeric = (plus - minus) / (2.0 * eps)
                worst = max(worst, float(relative_error(
                    grad.reshape(-1)[index], numeric)))
                checked += 1
    for param in params:
        param.grad = None
    return GradcheckResult(name, (len(params),), worst, checked,
                           worst < tolerance)


def _weighted(out, weights):
    """
    Reduce *out* to a scalar with fixed random *weights*, so that
    outputs with constant sum (softmax) still have informative gradient.
    """
    return ops.sum(ops.mul(out, weights))


def _away_from_zero(x, margin=0.1):
    scaled = margin + (1.0 - margin) * np.abs(x)
    return np.sign(x) * scaled + (x == 0) * margin


def _positive(x):
    return 0.5 + np.abs(x)


def primitive_cases(rng):
    """
    Yield ``(name, fn, arrays)`` triples covering every differentiable
    primitive on three random shapes each. Inputs lie in ``[-1, 1]``
    unless the primitive needs a restricted domain.
    """
    def uniform(*shape):
        return rng.uniform(-1.0, 1.0, size=shape)

    def unary(name, op, transform=None):
        for shape in [(4,), (3, 5), (2, 3, 4)]:
            x = uniform(*shape)
            if transform is not None:
                x = transform(x)
            with no_grad():
                w = uniform(*op(Tensor(x)).shape)
            yield name, (lambda t, op=op, w=w: _weighted(op(t[0]), w)), [x]

    def binary(name, op, second=None):
        for a_shape, b_shape in [((4,), (4,)), ((3, 5), (5,)),
                                 ((2, 3, 4), (2, 1, 4))]:
            a, b = uniform(*a_shape), uniform(*b_shape)
            if second is not None:
                b = second(b)
            w = uniform(*np.broadcast_shapes(a_shape, b_shape))
            yield name, (lambda t, op=op, w=w: _weighted(op(t[0], t[1]), w)), \
                [a, b]

    for case in binary('add', ops.add):
        yield case
    for case in binary('sub', ops.sub):
        yield case
    for case in binary('mul', ops.mul):
        yield case
    for case in binary('div', ops.div, second=_positive):
        yield case
    for name, op, transform in [
            ('exp', ops.exp, None), ('log', ops.log, _positive),
            ('sqrt', ops.sqrt, _positive), ('tanh', ops.tanh, None),
            ('sigmoid', ops.sigmoid, None), ('sin', ops.sin, None),
            ('cos', ops.cos, None),
            ('relu', ops.relu, _away_from_zero), ('gelu', ops.gelu, None),
            ('power', lambda x: ops.power(x, 3), None),
            ('softmax', lambda x: ops.softmax(x, axis=-1), None),
            ('log_softmax', lambda x: ops.log_softmax(x, axis=-1), None),
            ('clamp', lambda x: ops.clamp(x, -0.45, 0.45),
             lambda x: np.where(np.abs(x) < 0.5, 0.8 * x, x)),
            ('mean', lambda x: ops.mean(x, axis=-1), None),
            ('transpose', ops.transpose, None)]:
        for case in unary(name, op, transform):
            yield case

    for m, k, n in [(5, 7, 3), (2, 4, 6), (1, 3, 1)]:
        w = uniform(m, n)
        yield ('matmul',
               (lambda t, w=w: _weighted(ops.matmul(t[0], t[1]), w)),
               [uniform(m, k), uniform(k, n)])

    for shape in [(3, 8), (2, 4, 6), (5, 4)]:
        size = shape[-1]
        w = uniform(*shape)
        yield 'layer_norm', (lambda t, w=w: _weighted(
            ops.layer_norm(t[0], t[1], t[2]), w)), \
            [uniform(*shape), 1.0 + 0.5 * uniform(size), uniform(size)]

    for vocab, dim, length in [(6, 4, 5), (10, 3, 8), (3, 2, 7)]:
        ids = rng.integers(0, vocab, size=length)
        w = uniform(length, dim)
        yield 'embedding', (lambda t, ids=ids, w=w: _weighted(
            ops.embedding(t[0], ids), w)), [uniform(vocab, dim)]

    for batch, length, cin, cout, kernel, stride, dilation, padding in [
            (2, 9, 3, 4, 3, 1, 1, (1, 1)), (1, 11, 2, 3, 3, 2, 1, (1, 1)),
            (2, 10, 3, 2, 3, 1, 2, (2, 2))]:
        x = uniform(batch, length, cin)
        weight = uniform(kernel, cin, cout)
        bias = uniform(cout)
        out_len = (length + sum(padding) - dilation * (kernel - 1) - 1) \
            // stride + 1
        w = uniform(batch, out_len, cout)
        yield 'conv1d', (lambda t, s=stride, d=dilation, p=padding, w=w:
                         _weighted(ops.conv1d(t[0], t[1], t[2], stride=s,
                                              dilation=d, padding=p), w)), \
            [x, weight, bias]

    for batch, length, channels in [(2, 5, 3), (1, 4, 2), (3, 6, 4)]:
        mask = rng.random((batch, length)) < 0.7
        mask[:, 0] = True
        w = uniform(batch, channels)
        yield 'mean_pool', (lambda t, mask=mask, w=w: _weighted(
            ops.mean_pool(t[0], mask), w)), [uniform(batch, length, channels)]

    for shapes in [[(2, 3), (4, 3)], [(3, 2, 2), (3, 1, 2)], [(5,), (2,)]]:
        axis = 1 if len(shapes[0]) == 3 else 0
        out_shape = list(shapes[0])
        out_shape[axis] = shapes[0][axis] + shapes[1][axis]
        w = uniform(*out_shape)
        yield 'concat', (lambda t, axis=axis, w=w: _weighted(
            ops.concat(t, axis=axis), w)), [uniform(*s) for s in shapes]

    for shape in [(4, 5), (2, 3, 6), (7,)]:
        flat = int(np.prod(shape))
        w = uniform(flat)
        yield 'reshape', (lambda t, w=w: _weighted(
            ops.reshape(t[0], (-1,)), w)), [uniform(*shape)]

    for length, vocab, smoothing in [(5, 4, 0.0), (6, 7, 0.2), (3, 5, 0.1)]:
        targets = rng.integers(0, vocab, size=length)
        mask = np.ones(length, dtype=bool)
        mask[-1] = length < 6
        yield 'cross_entropy', (lambda t, y=targets, m=mask, s=smoothing:
                                ops.cross_entropy(t[0], y, mask=m,
                                                  label_smoothing=s)), \
            [uniform(length, vocab)]

    for shape in [(4,), (3, 5), (2, 3, 4)]:
        yield 'mse', (lambda t: ops.mse(t[0], t[1])), \
            [uniform(*shape), uniform(*shape)]

    for p, shape in [(0.1, (6, 4)), (0.3, (5,)), (0.5, (2, 3, 3))]:
        w = uniform(*shape)
        yield 'dropout', (lambda t, p=p, w=w: _weighted(
            ops.dropout(t[0], p, np.random.default_rng(7)), w)), \
            [uniform(*shape)]

    for shape in [(3, 4), (2, 5), (6,)]:
        index = (slice(None), 1) if len(shape) > 1 else np.array([0, 2, 2])
        w = uniform(*np.empty(shape)[index].shape)
        yield 'getitem', (lambda t, index=index, w=w: _weighted(
            ops.getitem(t[0], index), w)), [uniform(*shape)]


def run_cases(cases, tolerance=DEFAULT_TOLERANCE, max_elements=None,
              rng=None):
    """
    Run :func:`check_gradient` over ``(name, fn, arrays)`` *cases*.
    """
    return [check_gradient(fn, arrays, name=name, tolerance=tolerance,
                           max_elements=max_elements, rng=rng)
            for name, fn, arrays in cases]

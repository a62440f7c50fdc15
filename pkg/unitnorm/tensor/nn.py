"""
Module :module:`unitnorm.tensor.nn` provides parametrized building blocks
of the networks: linear and convolution layers, layer normalization,
embeddings, multi-head attention and pre-norm transformer layers.
"""

import collections
import math

import numpy as np

from unitnorm.core.exceptions import CheckpointError, ShapeError
from unitnorm.tensor import ops
from unitnorm.tensor.tensor import Tensor

__all__ = [
    'Parameter', 'Module', 'Linear', 'Conv1d', 'LayerNorm', 'Embedding',
    'Dropout', 'MultiHeadAttention', 'FeedForward',
    'TransformerEncoderLayer', 'TransformerDecoderLayer',
    'TransformerEncoder', 'TransformerDecoder',
]

NEG_INF = -1e9


class Parameter(Tensor):
    """
    Trainable leaf tensor.
    """

    def __init__(self, data, dtype=None):
        super(Parameter, self).__init__(data, requires_grad=True, dtype=dtype)


class Module(object):
    """
    Base class of the network components. Parameters and child modules
    are discovered from instance attributes (also inside lists) in the
    order they were assigned, which gives stable parameter names such as
    ``encoder.layers.0.attention.query.weight``.
    """

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield '%s.%d' % (name, i), item

    def named_parameters(self, prefix=''):
        """
        Yield ``(name, parameter)`` pairs of this module and all children.
        """
        for name, value in self._children():
            full = prefix + name
            if isinstance(value, Parameter):
                yield full, value
            else:
                for item in value.named_parameters(full + '.'):
                    yield item

    def parameters(self):
        return [param for _, param in self.named_parameters()]

    def modules(self):
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                for module in value.modules():
                    yield module

    def train(self, mode=True):
        for module in self.modules():
            module.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for param in self.parameters():
            param.grad = None

    def freeze(self):
        """
        Stop gradient tracking of all parameters (used for the frozen VAE).
        """
        for param in self.parameters():
            param.requires_grad = False
        return self

    def num_parameters(self):
        return int(np.sum([param.size for param in self.parameters()]))

    def astype(self, dtype):
        """
        Cast all parameters to floating point *dtype* in place.
        """
        for param in self.parameters():
            param.data = param.data.astype(dtype)
            param.grad = None
        return self

    def state_dict(self):
        """
        Return ordered mapping of parameter names to copies of their data.
        """
        return collections.OrderedDict(
            (name, param.data.copy())
            for name, param in self.named_parameters())

    def load_state_dict(self, state):
        """
        Copy arrays from *state* into the parameters. Missing, unexpected
        or differently shaped entries raise :exc:`CheckpointError`.
        """
        params = collections.OrderedDict(self.named_parameters())
        missing = [name for name in params if name not in state]
        unexpected = [name for name in state if name not in params]
        if missing or unexpected:
            raise CheckpointError(
                "Checkpoint does not match model, missing: %s, unexpected: %s"
                % (', '.join(missing) or '-', ', '.join(unexpected) or '-'))
        for name, param in params.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise CheckpointError(
                    "Parameter '%s' has shape %s in checkpoint, model "
                    "expects %s" % (name, value.shape, param.shape))
            param.data = value.astype(param.dtype)
            param.grad = None


def _uniform(rng, shape, bound):
    return Parameter(rng.uniform(-bound, bound, size=shape))


class Linear(Module):
    """
    Affine map of the last axis, Xavier uniform initialization.
    """

    def __init__(self, in_features, out_features, rng, bias=True):
        super(Linear, self).__init__()
        bound = math.sqrt(6.0 / (in_features + out_features))
        self.weight = _uniform(rng, (in_features, out_features), bound)
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        out = ops.matmul(x, self.weight) if x.ndim >= 2 else ops.reshape(
            ops.matmul(ops.reshape(x, (1, -1)), self.weight), (-1,))
        if self.bias is not None:
            out = out + self.bias
        return out


class Conv1d(Module):
    """
    Channel-last 1-D convolution. With ``padding='same'`` the output keeps
    input length (for stride 1), else *padding* is the number of zero
    frames added on both sides.
    """

    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1,
                 dilation=1, padding='same'):
        super(Conv1d, self).__init__()
        bound = math.sqrt(6.0 / ((in_channels + out_channels) * kernel_size))
        self.weight = _uniform(
            rng, (kernel_size, in_channels, out_channels), bound)
        self.bias = Parameter(np.zeros(out_channels))
        self.stride = stride
        self.dilation = dilation
        if padding == 'same':
            total = dilation * (kernel_size - 1)
            padding = (total // 2, total - total // 2)
        elif isinstance(padding, int):
            padding = (padding, padding)
        self.padding = tuple(padding)

    def forward(self, x):
        return ops.conv1d(x, self.weight, self.bias, stride=self.stride,
                          dilation=self.dilation, padding=self.padding)


class LayerNorm(Module):

    def __init__(self, size, eps=1e-5):
        super(LayerNorm, self).__init__()
        self.weight = Parameter(np.ones(size))
        self.bias = Parameter(np.zeros(size))
        self.eps = eps

    def forward(self, x):
        return ops.layer_norm(x, self.weight, self.bias, eps=self.eps)


class Embedding(Module):

    def __init__(self, num_embeddings, dim, rng):
        super(Embedding, self).__init__()
        self.weight = Parameter(rng.normal(0.0, dim ** -0.5,
                                           size=(num_embeddings, dim)))

    def forward(self, ids):
        return ops.embedding(self.weight, ids)


class Dropout(Module):
    """
    Inverted dropout with its own generator, active in training mode.
    """

    def __init__(self, p, rng):
        super(Dropout, self).__init__()
        self.p = float(p)
        self.rng = rng

    def forward(self, x):
        return ops.dropout(x, self.p, self.rng, training=self.training)


class MultiHeadAttention(Module):
    """
    Scaled dot-product attention with *heads* heads. *key_mask* is
    a boolean ``B x Lk`` array of valid key positions, *causal* forbids
    attending to later positions.
    """

    def __init__(self, dim, heads, rng, dropout=0.0):
        super(MultiHeadAttention, self).__init__()
        if dim % heads:
            raise ValueError("Model dimension %d is not divisible by %d heads"
                             % (dim, heads))
        self.dim = dim
        self.heads = heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.output = Linear(dim, dim, rng)
        self.dropout = Dropout(dropout, rng)

    def _split(self, x):
        batch, length, _ = x.shape
        x = ops.reshape(x, (batch, length, self.heads, self.dim // self.heads))
        return ops.transpose(x, (0, 2, 1, 3))

    def forward(self, query, memory=None, key_mask=None, causal=False):
        memory = query if memory is None else memory
        batch, q_len, _ = query.shape
        k_len = memory.shape[1]
        q = self._split(self.query(query))
        k = self._split(self.key(memory))
        v = self._split(self.value(memory))
        scores = ops.matmul(q, ops.transpose(k, (0, 1, 3, 2)))
        scores = scores * (1.0 / math.sqrt(self.dim // self.heads))
        blocked = np.zeros((batch, 1, q_len, k_len), dtype=bool)
        if key_mask is not None:
            key_mask = np.asarray(key_mask, dtype=bool)
            if key_mask.shape != (batch, k_len):
                raise ShapeError("Key mask shape %s does not match %s"
                                 % (key_mask.shape, (batch, k_len)))
            blocked |= ~key_mask[:, None, None, :]
        if causal:
            blocked |= np.triu(np.ones((q_len, k_len), dtype=bool), k=1)
        if blocked.any():
            scores = ops.masked_fill(scores, blocked, NEG_INF)
        weights = self.dropout(ops.softmax(scores, axis=-1))
        context = ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3))
        context = ops.reshape(context, (batch, q_len, self.dim))
        return self.output(context)

    def incremental(self, query, state, memory=None, key_mask=None):
        """
        Attention of the newest position *query* (``B x 1 x D``) in step
        by step decoding. Without *memory* it attends to every position
        passed so far, whose projected keys and values are appended to
        *state*; with *memory* the projected memory is computed once and
        kept in *state*. Dropout is never applied.
        """
        if memory is None:
            k = self._split(self.key(query))
            v = self._split(self.value(query))
            if 'keys' in state:
                k = ops.concat([state['keys'], k], axis=2)
                v = ops.concat([state['values'], v], axis=2)
            state['keys'], state['values'] = k, v
        elif 'keys' in state:
            k, v = state['keys'], state['values']
        else:
            k = self._split(self.key(memory))
            v = self._split(self.value(memory))
            state['keys'], state['values'] = k, v
        batch, q_len, _ = query.shape
        q = self._split(self.query(query))
        scores = ops.matmul(q, ops.transpose(k, (0, 1, 3, 2)))
        scores = scores * (1.0 / math.sqrt(self.dim // self.heads))
        if key_mask is not None:
            key_mask = np.asarray(key_mask, dtype=bool)
            if key_mask.shape != (batch, k.shape[2]):
                raise ShapeError("Key mask shape %s does not match %s"
                                 % (key_mask.shape, (batch, k.shape[2])))
            blocked = np.broadcast_to(~key_mask[:, None, None, :],
                                      scores.shape)
            if blocked.any():
                scores = ops.masked_fill(scores, blocked, NEG_INF)
        weights = ops.softmax(scores, axis=-1)
        context = ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3))
        context = ops.reshape(context, (batch, q_len, self.dim))
        return self.output(context)


class FeedForward(Module):

    def __init__(self, dim, hidden, rng, dropout=0.0):
        super(FeedForward, self).__init__()
        self.inner = Linear(dim, hidden, rng)
        self.outer = Linear(hidden, dim, rng)
        self.dropout = Dropout(dropout, rng)

    def forward(self, x):
        return self.outer(self.dropout(ops.gelu(self.inner(x))))


class TransformerEncoderLayer(Module):
    """
    Pre-norm self-attention layer.
    """

    def __init__(self, dim, heads, ffn_dim, rng, dropout=0.0):
        super(TransformerEncoderLayer, self).__init__()
        self.attention_norm = LayerNorm(dim)
        self.attention = MultiHeadAttention(dim, heads, rng, dropout=dropout)
        self.ffn_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_dim, rng, dropout=dropout)
        self.dropout = Dropout(dropout, rng)

    def forward(self, x, mask=None, causal=False):
        x = x + self.dropout(
            self.attention(self.attention_norm(x), key_mask=mask,
                           causal=causal))
        return x + self.dropout(self.ffn(self.ffn_norm(x)))


class TransformerDecoderLayer(Module):
    """
    Pre-norm layer with self-attention and attention over encoder memory.
    """

    def __init__(self, dim, heads, ffn_dim, rng, dropout=0.0):
        super(TransformerDecoderLayer, self).__init__()
        self.self_norm = LayerNorm(dim)
        self.self_attention = MultiHeadAttention(dim, heads, rng,
                                                 dropout=dropout)
        self.cross_norm = LayerNorm(dim)
        self.cross_attention = MultiHeadAttention(dim, heads, rng,
                                                  dropout=dropout)
        self.ffn_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_dim, rng, dropout=dropout)
        self.dropout = Dropout(dropout, rng)

    def forward(self, x, memory, mask=None, memory_mask=None, causal=False):
        x = x + self.dropout(self.self_attention(
            self.self_norm(x), key_mask=mask, causal=causal))
        x = x + self.dropout(self.cross_attention(
            self.cross_norm(x), memory=memory, key_mask=memory_mask))
        return x + self.dropout(self.ffn(self.ffn_norm(x)))

    def step(self, x, memory, state, memory_mask=None):
        """
        Causal forward pass of the single newest position *x* using the
        per-layer cache *state* (a dict filled on the first call).
        """
        x = x + self.self_attention.incremental(
            self.self_norm(x), state.setdefault('self', {}))
        x = x + self.cross_attention.incremental(
            self.cross_norm(x), state.setdefault('cross', {}),
            memory=memory, key_mask=memory_mask)
        return x + self.ffn(self.ffn_norm(x))


class TransformerEncoder(Module):

    def __init__(self, layers, dim, heads, ffn_dim, rng, dropout=0.0):
        super(TransformerEncoder, self).__init__()
        self.layers = [TransformerEncoderLayer(dim, heads, ffn_dim, rng,
                                               dropout=dropout)
                       for _ in range(layers)]
        self.norm = LayerNorm(dim)

    def forward(self, x, mask=None, causal=False):
        for layer in self.layers:
            x = layer(x, mask=mask, causal=causal)
        return self.norm(x)


class TransformerDecoder(Module):

    def __init__(self, layers, dim, heads, ffn_dim, rng, dropout=0.0):
        super(TransformerDecoder, self).__init__()
        self.layers = [TransformerDecoderLayer(dim, heads, ffn_dim, rng,
                                               dropout=dropout)
                       for _ in range(layers)]
        self.norm = LayerNorm(dim)

    def forward(self, x, memory, mask=None, memory_mask=None, causal=False):
        for layer in self.layers:
            x = layer(x, memory, mask=mask, memory_mask=memory_mask,
                      causal=causal)
        return self.norm(x)

    def step(self, x, memory, states, memory_mask=None):
        """
        Decode one more position *x* (``B x 1 x D``); *states* holds one
        cache dict per layer, see :meth:`TransformerDecoderLayer.step`.
        """
        if len(states) != len(self.layers):
            raise ValueError("Got %d layer caches for %d layers"
                             % (len(states), len(self.layers)))
        for layer, state in zip(self.layers, states):
            x = layer.step(x, memory, state, memory_mask=memory_mask)
        return self.norm(x)

"""
Module :module:`unitnorm.models.layers` provides building blocks shared
by the VAE and the diffusion model: gated dilated-convolution residual
blocks and helpers for batched variable-length input.
"""

import math

import numpy as np

from unitnorm.core.exceptions import ShapeError
from unitnorm.tensor import ops
from unitnorm.tensor.nn import Conv1d, Linear, Module
from unitnorm.tensor.tensor import as_tensor

__all__ = [
    'as_batch', 'frame_weights', 'add_positions', 'WaveNetResidualBlock',
    'WaveNetStack', 'unbatch',
]

SKIP_SCALE = math.sqrt(0.5)


def as_batch(x, dim, what='input', mask=None):
    """
    Convert sequence *x* (``M x dim``) or batch (``B x M x dim``) into
    a 3-D tensor. Return ``(tensor, mask, batched)``, *mask* marks valid
    frames (all of them when not given).
    """
    x = as_tensor(x)
    batched = x.ndim == 3
    if x.ndim == 2:
        x = ops.reshape(x, (1,) + x.shape)
    if x.ndim != 3 or x.shape[-1] != dim:
        raise ShapeError("Expected %s with last dimension %d, got shape %s"
                         % (what, dim, x.shape))
    if x.shape[1] < 1:
        raise ShapeError("%s sequence is empty" % what.capitalize())
    if mask is None:
        mask = np.ones(x.shape[:2], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        mask = mask[None, :]
    if mask.shape != x.shape[:2]:
        raise ShapeError("Mask of shape %s does not match %s %s"
                         % (mask.shape, what, x.shape))
    return x, mask, batched


def unbatch(x, batched):
    return x if batched else ops.reshape(x, x.shape[1:])


def frame_weights(mask, dtype):
    """
    Mask as ``B x M x 1`` array of zeros and ones.
    """
    return np.asarray(mask, dtype=dtype)[:, :, None]


def add_positions(x):
    """
    Add sinusoidal encoding of frame positions to ``B x M x D`` *x*.
    """
    return x + ops.sinusoidal_encoding(np.arange(x.shape[1]), x.shape[2],
                                       dtype=x.dtype)


class WaveNetResidualBlock(Module):
    """
    Dilated convolution with ``tanh * sigmoid`` gate, residual and skip
    projections. With *condition_dim* the convolution output is
    modulated by scale and shift computed from a per-sequence condition
    vector (the diffusion time embedding).
    """

    def __init__(self, channels, kernel_size, dilation, rng,
                 condition_dim=None):
        super(WaveNetResidualBlock, self).__init__()
        self.channels = channels
        self.conv = Conv1d(channels, 2 * channels, kernel_size, rng,
                           dilation=dilation)
        self.condition = Linear(condition_dim, 4 * channels, rng) \
            if condition_dim else None
        self.residual = Linear(channels, channels, rng)
        self.skip = Linear(channels, channels, rng)

    def forward(self, x, weights, condition=None):
        h = self.conv(x)
        if self.condition is not None:
            if condition is None:
                raise ValueError("Conditioned block needs condition vector")
            modulation = self.condition(condition)
            modulation = ops.reshape(modulation, (x.shape[0], 1, -1))
            scale = modulation[:, :, :2 * self.channels]
            shift = modulation[:, :, 2 * self.channels:]
            h = h * (scale + 1.0) + shift
        gate = ops.tanh(h[:, :, :self.channels]) * \
            ops.sigmoid(h[:, :, self.channels:])
        gate = gate * weights
        out = (x + self.residual(gate)) * (weights * SKIP_SCALE)
        return out, self.skip(gate)


class WaveNetStack(Module):
    """
    *stacks* repetitions of *layers* residual blocks with dilations
    ``1, 2, ..., 2 ** (layers - 1)``; skip outputs are summed, passed
    through GELU and projected to *out_dim*.
    """

    def __init__(self, in_dim, channels, out_dim, stacks, layers, kernel_size,
                 rng, condition_dim=None):
        super(WaveNetStack, self).__init__()
        self.input = Linear(in_dim, channels, rng)
        self.blocks = [
            WaveNetResidualBlock(channels, kernel_size, 2 ** layer, rng,
                                 condition_dim=condition_dim)
            for _ in range(stacks) for layer in range(layers)]
        self.output = Linear(channels, out_dim, rng)

    def forward(self, x, weights, condition=None):
        x = self.input(x) * weights
        skips = None
        for block in self.blocks:
            x, skip = block(x, weights, condition=condition)
            skips = skip if skips is None else skips + skip
        skips = skips * (1.0 / math.sqrt(len(self.blocks)))
        return self.output(ops.gelu(skips)) * weights

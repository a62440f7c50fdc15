"""
Module :module:`unitnorm.tensor.optim` provides Adam optimizer with
global-norm gradient clipping and the learning rate schedule.
"""

import logging
import math

import numpy as np

from unitnorm.core.exceptions import TensorError

__all__ = ['OptimizerState', 'Adam', 'InverseSqrtSchedule', 'global_norm']

logger = logging.getLogger(__name__)


def global_norm(grads):
    """
    Euclidean norm of all arrays in *grads* taken together.
    """
    total = 0.0
    for grad in grads:
        total += float(np.sum(np.square(grad, dtype=np.float64)))
    return math.sqrt(total)


class OptimizerState(object):
    """
    Per-parameter first and second moment buffers and the step counter.
    """

    def __init__(self, params):
        self.step = 0
        self.first = [np.zeros_like(param.data) for param in params]
        self.second = [np.zeros_like(param.data) for param in params]


class InverseSqrtSchedule(object):
    """
    Linear warmup from ``lr / warmup_steps`` to *lr* over *warmup_steps*
    updates, then decay proportional to inverse square root of the step.
    ``warmup_steps == 0`` gives constant learning rate.
    """

    def __init__(self, lr, warmup_steps=0):
        if lr <= 0:
            raise ValueError("Learning rate must be positive, got %r" % lr)
        if warmup_steps < 0:
            raise ValueError("Warmup steps must be >= 0, got %r"
                             % warmup_steps)
        self.lr = float(lr)
        self.warmup_steps = int(warmup_steps)

    def __call__(self, step):
        if self.warmup_steps == 0:
            return self.lr
        if step <= self.warmup_steps:
            return self.lr * step / self.warmup_steps
        return self.lr * math.sqrt(self.warmup_steps / float(step))


class Adam(object):
    """
    Adam optimizer over *params*. Before the moment update, gradients are
    scaled by ``clip_norm / norm`` when their global norm exceeds
    *clip_norm* (``None`` or ``0`` disables clipping). *lr* is a number
    or a callable of the step number (starting at 1).
    """

    def __init__(self, params, lr=5e-4, betas=(0.9, 0.98), eps=1e-8,
                 clip_norm=None, weight_decay=0.0):
        self.params = list(params)
        if not self.params:
            raise ValueError("Optimizer got an empty parameter list")
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.clip_norm = clip_norm
        self.weight_decay = weight_decay
        self.state = OptimizerState(self.params)

    def current_lr(self, step=None):
        step = self.state.step + 1 if step is None else step
        return self.lr(step) if callable(self.lr) else self.lr

    def zero_grad(self):
        for param in self.params:
            param.grad = None

    def step(self):
        """
        Apply one update to all parameters which have gradient, then zero
        the gradients. Return global gradient norm before clipping.
        Raise :exc:`TensorError` when no parameter has gradient.
        """
        active = [i for i, param in enumerate(self.params)
                  if param.grad is not None]
        if not active:
            raise TensorError("Optimizer step called but no parameter has "
                              "a gradient, call backward() first")
        grads = [self.params[i].grad for i in active]
        norm = global_norm(grads)
        if not math.isfinite(norm):
            raise TensorError("Gradient norm is not finite")
        scale = 1.0
        if self.clip_norm and norm > self.clip_norm:
            scale = self.clip_norm / norm

        self.state.step += 1
        step = self.state.step
        lr = self.current_lr(step)
        beta1, beta2 = self.betas
        correction1 = 1.0 - beta1 ** step
        correction2 = 1.0 - beta2 ** step
        for i, grad in zip(active, grads):
            param = self.params[i]
            grad = grad * scale
            if self.weight_decay:
                grad = grad + self.weight_decay * param.data
            first = self.state.first[i]
            second = self.state.second[i]
            first *= beta1
            first += (1.0 - beta1) * grad
            second *= beta2
            second += (1.0 - beta2) * grad * grad
            update = (lr * (first / correction1)
                      / (np.sqrt(second / correction2) + self.eps))
            param.data = (param.data - update).astype(param.dtype)
        self.zero_grad()
        return norm

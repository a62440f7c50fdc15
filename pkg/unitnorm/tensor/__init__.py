"""
Dense tensors with reverse-mode automatic differentiation.
"""

from unitnorm.tensor.tensor import (  # noqa: F401
    Tensor, as_tensor, no_grad, precision, is_grad_enabled)

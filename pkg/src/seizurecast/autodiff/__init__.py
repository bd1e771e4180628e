"""Float64 tensors with reverse-mode automatic differentiation."""

from seizurecast.autodiff import ops
from seizurecast.autodiff.tensor import Tape, Tensor, grad_enabled, no_grad

__all__ = ["Tape", "Tensor", "grad_enabled", "no_grad", "ops"]

from . import autodiff, layers, optim
from .autodiff import Tensor

__all__ = ["autodiff", "layers", "optim", "Tensor"]

from . import tape
from .adam import AdamState, adam_step
from .gradcheck import check_full_gradient, check_gradients, relative_error
from .nets import FeedForwardNet
from .tape import Tensor

__all__ = [
    "tape",
    "Tensor",
    "FeedForwardNet",
    "AdamState",
    "adam_step",
    "check_gradients",
    "check_full_gradient",
    "relative_error",
]

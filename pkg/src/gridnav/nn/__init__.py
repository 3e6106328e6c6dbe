"""From-scratch neural-network engine for the double-input Q-network."""

from .checkpoint import load_checkpoint, save_checkpoint
from .loss import mse_loss, mse_loss_grad
from .model import (
    ArchitectureSpec,
    QNetwork,
    backward,
    backward_sequence,
    clone_params,
    forward,
    forward_cached,
    forward_sequence,
    image_features,
    init_network,
    q_from_features,
    zero_grads,
)
from .optim import AdamState, adam_step, init_adam

__all__ = [
    "ArchitectureSpec",
    "QNetwork",
    "AdamState",
    "adam_step",
    "backward",
    "backward_sequence",
    "clone_params",
    "forward",
    "forward_cached",
    "forward_sequence",
    "image_features",
    "init_adam",
    "init_network",
    "load_checkpoint",
    "mse_loss",
    "mse_loss_grad",
    "q_from_features",
    "save_checkpoint",
    "zero_grads",
]

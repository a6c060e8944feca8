"""Gradient tape, MLP building blocks, AdamW, and checkpoint IO."""

from .autodiff import Node, Param, Tape, backward
from .checkpoint import Checkpoint, checkpoints_equal, load_checkpoint, save_checkpoint
from .mlp import MlpConfig, MlpParams, init_params, mlp_apply, mlp_forward
from .optim import AdamWState, adamw_step

__all__ = [
    "Node", "Param", "Tape", "backward",
    "MlpConfig", "MlpParams", "init_params", "mlp_apply", "mlp_forward",
    "AdamWState", "adamw_step",
    "Checkpoint", "checkpoints_equal", "load_checkpoint", "save_checkpoint",
]

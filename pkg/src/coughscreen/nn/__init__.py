from .layers import (
    Parameter,
    Conv2d,
    Linear,
    ReLU,
    MaxPool2d,
    GlobalAvgPool,
    Dropout,
    softmax,
    softmax_cross_entropy,
)
from .models import CoughNet, ContextNet, build_model
from .optim import SGD, AdamW, step_decay_lr
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint

__all__ = [
    "Parameter", "Conv2d", "Linear", "ReLU", "MaxPool2d", "GlobalAvgPool",
    "Dropout", "softmax", "softmax_cross_entropy",
    "CoughNet", "ContextNet", "build_model",
    "SGD", "AdamW", "step_decay_lr",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
]

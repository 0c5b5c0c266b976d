"""Optimizers: plain SGD for the context model, AdamW with decoupled
weight decay for the cough model, plus the stepped learning-rate decay."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError
from .layers import Parameter


def _check_finite(params: list[Parameter]):
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(
                f"non-finite gradient in {p.name or 'parameter'} "
                f"(shape {p.shape}); aborting the step")


class SGD:
    def __init__(self, params: list[Parameter], lr: float = 1e-2):
        self.params = params
        self.lr = lr

    def step(self):
        _check_finite(self.params)
        for p in self.params:
            p.data -= (self.lr * p.grad).astype(p.data.dtype)


class AdamW:
    """Bias-corrected Adam with decoupled weight decay."""

    def __init__(self, params: list[Parameter], lr: float = 1e-4,
                 betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.data, dtype=np.float64) for p in params]
        self._v = [np.zeros_like(p.data, dtype=np.float64) for p in params]

    def step(self):
        _check_finite(self.params)
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad.astype(np.float64)
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            update += self.weight_decay * p.data
            p.data -= (self.lr * update).astype(p.data.dtype)


def step_decay_lr(base_lr: float, epoch: int, factor: float = 0.95,
                  period: int = 10) -> float:
    """base_lr * factor^floor(epoch/period); epochs count from 0."""
    return base_lr * factor ** (epoch // period)

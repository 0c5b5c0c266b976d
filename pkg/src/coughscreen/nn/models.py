"""The two classifiers.

CoughNet: 4 conv blocks (3x3 conv / ReLU / 2x2 max-pool, channels
1->8->16->32->64), global average pooling, then a 64->32->16->2 head
with ReLU + dropout 0.4 after each hidden linear, softmax output.

ContextNet: linear (optionally one 16-wide ReLU hidden layer) map from
the encoded context vector to 2 logits, softmax output.
"""

from __future__ import annotations

import numpy as np

from .layers import (Conv2d, Dropout, GlobalAvgPool, Layer, Linear,
                     MaxPool2d, ReLU, softmax)


class _Sequential:
    layers: list[Layer]
    kind: str

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        h = x.astype(self.dtype, copy=False)
        for layer in self.layers:
            h = layer.forward(h, train=train, rng=rng)
        return h

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        d = dlogits
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x, train=False))

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def get_weights(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params()]

    def set_weights(self, weights: list[np.ndarray]):
        own = self.params()
        if len(own) != len(weights):
            raise ValueError(f"expected {len(own)} weight arrays, "
                             f"got {len(weights)}")
        for p, w in zip(own, weights):
            if p.data.shape != w.shape:
                raise ValueError(f"{p.name}: shape {w.shape} != "
                                 f"{p.data.shape}")
            p.data = w.astype(self.dtype)
            p.grad = np.zeros_like(p.data)


class CoughNet(_Sequential):
    kind = "cough"

    def __init__(self, channels=(8, 16, 32, 64), hidden=(32, 16),
                 dropout: float = 0.4, n_classes: int = 2, seed: int = 0,
                 dtype=np.float32):
        self.arch = {"channels": list(channels), "hidden": list(hidden),
                     "dropout": dropout, "n_classes": n_classes}
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        layers: list[Layer] = []
        in_ch = 1
        for ch in channels:
            layers += [Conv2d(in_ch, ch, rng=rng, dtype=dtype), ReLU(),
                       MaxPool2d()]
            in_ch = ch
        # GradCAM taps the activation map right after the last conv's ReLU.
        self.last_conv_relu = len(layers) - 2
        layers.append(GlobalAvgPool())
        d = channels[-1]
        for h in hidden:
            layers += [Linear(d, h, rng=rng, dtype=dtype), ReLU(),
                       Dropout(dropout)]
            d = h
        layers.append(Linear(d, n_classes, rng=rng, dtype=dtype))
        self.layers = layers

    def activations_and_gradient(self, x: np.ndarray, target_class: int
                                 ) -> tuple[np.ndarray, np.ndarray]:
        """Last-conv ReLU activations A and dlogit[target]/dA, eval mode."""
        logits = self.forward(x, train=False)
        seed = np.zeros_like(logits)
        seed[:, target_class] = 1.0
        d = seed
        for layer in reversed(self.layers[self.last_conv_relu + 1:]):
            d = layer.backward(d)
        acts = self.layers[self.last_conv_relu].out
        return acts, d


class ContextNet(_Sequential):
    kind = "context"

    def __init__(self, in_dim: int, hidden: int | None = None,
                 n_classes: int = 2, seed: int = 0, dtype=np.float32):
        self.arch = {"in_dim": in_dim, "hidden": hidden,
                     "n_classes": n_classes}
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        if hidden:
            self.layers = [Linear(in_dim, hidden, rng=rng, dtype=dtype),
                           ReLU(),
                           Linear(hidden, n_classes, rng=rng, dtype=dtype)]
        else:
            self.layers = [Linear(in_dim, n_classes, rng=rng, dtype=dtype)]


def build_model(kind: str, arch: dict, dtype=None):
    """Instantiate a model from its checkpointed architecture dict."""
    if kind == "cough":
        return CoughNet(
            channels=tuple(arch["channels"]), hidden=tuple(arch["hidden"]),
            dropout=float(arch["dropout"]),
            n_classes=int(arch["n_classes"]),
            dtype=dtype or np.float32)
    if kind == "context":
        return ContextNet(
            in_dim=int(arch["in_dim"]),
            hidden=arch["hidden"] if arch["hidden"] else None,
            n_classes=int(arch["n_classes"]),
            dtype=dtype or np.float32)
    raise ValueError(f"unknown model kind {kind!r}")

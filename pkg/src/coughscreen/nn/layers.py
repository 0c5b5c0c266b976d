"""Desk-scale neural-network layers with explicit reverse-mode gradients.

Each layer caches what its backward pass needs during forward, so the
usage pattern is strictly forward -> backward on the same batch.
Everything runs on numpy; dtype follows the parameters (float32 for
training, float64 for gradient checks).
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingError


class Parameter:
    """Weight array with a gradient buffer of the same shape."""

    def __init__(self, data: np.ndarray, name: str = ""):
        self.data = data
        self.grad = np.zeros_like(data)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad[...] = 0


def _fan_in_uniform(rng: np.random.Generator, shape, fan_in: int, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    def params(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2d(Layer):
    """3x3 convolution, stride 1, zero padding (default 'same')."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int = 3,
                 pad: int = 1, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        fan_in = in_ch * kernel * kernel
        self.w = Parameter(
            _fan_in_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in,
                            dtype), "conv.w")
        self.b = Parameter(np.zeros(out_ch, dtype=dtype), "conv.b")
        self.kernel = kernel
        self.pad = pad
        self._cols = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=False, rng=None):
        p, k = self.pad, self.kernel
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = np.lib.stride_tricks.sliding_window_view(xp, (k, k),
                                                        axis=(2, 3))
        self._cols = cols
        self._in_shape = x.shape
        y = np.tensordot(cols, self.w.data, axes=([1, 4, 5], [1, 2, 3]))
        return np.moveaxis(y, 3, 1) + self.b.data[None, :, None, None]

    def backward(self, dy):
        k, p = self.kernel, self.pad
        self.w.grad += np.tensordot(dy, self._cols,
                                    axes=([0, 2, 3], [0, 2, 3]))
        self.b.grad += dy.sum(axis=(0, 2, 3))
        # dx = correlation of dy with the 180-degree-rotated kernel.
        q = k - 1 - p
        dyp = np.pad(dy, ((0, 0), (0, 0), (q, q), (q, q)))
        cols = np.lib.stride_tricks.sliding_window_view(dyp, (k, k),
                                                        axis=(2, 3))
        w_flip = self.w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        dx = np.tensordot(cols, w_flip, axes=([1, 4, 5], [1, 2, 3]))
        return np.moveaxis(dx, 3, 1)


class Linear(Layer):
    def __init__(self, in_dim: int, out_dim: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.w = Parameter(
            _fan_in_uniform(rng, (out_dim, in_dim), in_dim, dtype),
            "linear.w")
        self.b = Parameter(np.zeros(out_dim, dtype=dtype), "linear.b")

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train=False, rng=None):
        self._x = x
        return x @ self.w.data.T + self.b.data

    def backward(self, dy):
        self.w.grad += dy.T @ self._x
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.data


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        self._mask = x > 0
        self.out = x * self._mask
        return self.out

    def backward(self, dy):
        return dy * self._mask


class MaxPool2d(Layer):
    """2x2 max pooling, stride 2; odd trailing rows/columns are dropped."""

    def forward(self, x, train=False, rng=None):
        b, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        self._in_shape = x.shape
        t = x[:, :, :h2 * 2, :w2 * 2].reshape(b, c, h2, 2, w2, 2)
        t = t.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
        self._idx = t.argmax(axis=-1)
        return np.take_along_axis(t, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        b, c, h, w = self._in_shape
        h2, w2 = h // 2, w // 2
        g = np.zeros((b, c, h2, w2, 4), dtype=dy.dtype)
        np.put_along_axis(g, self._idx[..., None], dy[..., None], axis=-1)
        g = g.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        dx = np.zeros(self._in_shape, dtype=dy.dtype)
        dx[:, :, :h2 * 2, :w2 * 2] = g.reshape(b, c, h2 * 2, w2 * 2)
        return dx


class GlobalAvgPool(Layer):
    """[B, C, H, W] -> [B, C] spatial mean."""

    def forward(self, x, train=False, rng=None):
        self._in_shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dy):
        b, c, h, w = self._in_shape
        return np.broadcast_to(dy[:, :, None, None] / (h * w),
                               self._in_shape).astype(dy.dtype).copy()


class Dropout(Layer):
    """Inverted dropout: active only in train mode, identity in eval."""

    def __init__(self, p: float):
        if not 0 <= p < 1:
            raise ValueError("dropout probability must be in [0, 1)")
        self.p = p
        self._scale = 1.0

    def forward(self, x, train=False, rng=None):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise TrainingError("train-mode dropout needs an rng")
        self._mask = (rng.random(x.shape) >= self.p).astype(x.dtype)
        self._scale = 1.0 / (1.0 - self.p)
        return x * self._mask * self._scale

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask * self._scale


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray
                          ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over the batch.

    Returns (loss, probabilities, dloss/dlogits).
    """
    n = logits.shape[0]
    probs = softmax(logits)
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, probs, dlogits.astype(logits.dtype)

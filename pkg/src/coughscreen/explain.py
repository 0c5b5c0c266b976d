"""Model interpretability: gradient-weighted saliency maps over
log-mel patches and local linear surrogate attributions for context
features."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cohort import CONTINUOUS_FEATURES, EncoderState
from .errors import ExplainError

PATCH_SHAPE = (64, 201)


def bilinear_upsample(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear interpolation with corner alignment."""
    h, w = m.shape
    rows = np.linspace(0.0, h - 1.0, out_h) if h > 1 else np.zeros(out_h)
    cols = np.linspace(0.0, w - 1.0, out_w) if w > 1 else np.zeros(out_w)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = m[np.ix_(r0, c0)] * (1 - fc) + m[np.ix_(r0, c1)] * fc
    bot = m[np.ix_(r1, c0)] * (1 - fc) + m[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def saliency(model, patch: np.ndarray, target_class: int = 1) -> np.ndarray:
    """Class-discriminative saliency over the input patch.

    Channel importances come from the last conv layer's ReLU output A
    and the logit gradient g at that layer:
      alpha = g^2 / (2 g^2 + sum_ij(A * g^3))   (0/0 treated as 0)
      w_k   = sum_ij alpha * relu(g)
    The weighted activation sum is rectified, upsampled to the patch
    grid, and scaled so its max is 1 (all-zero maps stay zero).
    """
    if patch.shape != PATCH_SHAPE:
        raise ExplainError(f"expected patch {PATCH_SHAPE}, "
                           f"got {patch.shape}")
    x = patch[None, None, :, :]
    acts, grads = model.activations_and_gradient(x, target_class)
    a = acts[0].astype(np.float64)       # [C, H, W]
    g = grads[0].astype(np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(g))):
        raise ExplainError("non-finite activations or gradients; "
                           "is the model trained?")
    g2 = g * g
    g3 = g2 * g
    denom = 2.0 * g2 + np.sum(a * g3, axis=(1, 2), keepdims=True)
    alpha = np.divide(g2, denom, out=np.zeros_like(g2),
                      where=denom != 0.0)
    weights = np.sum(alpha * np.maximum(g, 0.0), axis=(1, 2))  # [C]
    raw = np.maximum(np.tensordot(weights, a, axes=1), 0.0)    # [H, W]
    up = bilinear_upsample(raw, *PATCH_SHAPE)
    up = np.maximum(up, 0.0)
    peak = up.max()
    if peak > 0:
        up = up / peak
    return up


def write_pgm(path, m: np.ndarray):
    """8-bit binary PGM of a [0,1] map, frequency axis pointing up."""
    img = np.flipud(np.clip(m, 0.0, 1.0))
    data = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n"
                 .encode("ascii"))
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# Local linear surrogate for the context model

@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 1000
    kernel_width: float | None = None   # default 0.75 * sqrt(D)
    ridge_lambda: float = 1e-3
    categorical_resample_p: float = 0.3
    seed: int = 0


@dataclass
class FeatureAttribution:
    weights: dict[str, float]
    intercept: float
    r2: float

    def sorted_weights(self) -> list[tuple[str, float]]:
        return sorted(self.weights.items(), key=lambda kv: -abs(kv[1]))

    def to_json(self) -> str:
        return json.dumps({"weights": dict(self.sorted_weights()),
                           "intercept": self.intercept, "r2": self.r2},
                          indent=2)


def _weighted_ridge(x: np.ndarray, y: np.ndarray, w: np.ndarray,
                    lam: float) -> tuple[np.ndarray, float]:
    """Closed-form ridge with an unpenalized intercept."""
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    wx = xa * w[:, None]
    gram = xa.T @ wx
    reg = lam * np.eye(d + 1)
    reg[d, d] = 0.0
    beta = np.linalg.solve(gram + reg, wx.T @ y)
    return beta[:d], float(beta[d])


def lime_explain(model, instance: np.ndarray, encoder: EncoderState,
                 train_x: np.ndarray, cfg: LimeConfig = LimeConfig()
                 ) -> FeatureAttribution:
    """Weighted linear surrogate of the model around one encoded
    instance.

    Continuous coordinates get additive unit-variance gaussian noise;
    categorical coordinates are resampled from their train-set code
    marginals with a fixed per-feature probability. Samples are
    weighted by exp(-d^2 / kappa^2) in encoded space and a ridge fit
    approximates the model's positive-class probability. The weighted
    R^2 of that fit is reported alongside the coefficients.
    """
    d = encoder.dim
    if instance.shape != (d,):
        raise ExplainError(f"instance has dim {instance.shape}, "
                           f"encoder expects ({d},)")
    if train_x.ndim != 2 or train_x.shape[1] != d:
        raise ExplainError("train matrix does not match encoder dim")
    rng = np.random.default_rng(cfg.seed)
    n_cont = sum(1 for f in CONTINUOUS_FEATURES if f in encoder.cont_stats)

    samples = np.tile(instance, (cfg.n_samples, 1))
    if n_cont:
        samples[:, :n_cont] += rng.standard_normal((cfg.n_samples, n_cont))
    for j in range(n_cont, d):
        codes, counts = np.unique(train_x[:, j], return_counts=True)
        marginal = counts / counts.sum()
        resample = rng.random(cfg.n_samples) < cfg.categorical_resample_p
        drawn = rng.choice(codes, size=cfg.n_samples, p=marginal)
        samples[resample, j] = drawn[resample]

    y = model.predict_proba(samples)[:, 1].astype(np.float64)
    dist2 = np.sum((samples - instance) ** 2, axis=1)
    kappa = cfg.kernel_width if cfg.kernel_width is not None \
        else 0.75 * np.sqrt(d)
    w = np.exp(-dist2 / (kappa * kappa))
    if w.sum() < 1e-12:
        raise ExplainError("all perturbation weights vanished; widen "
                           "the kernel")

    coef, intercept = _weighted_ridge(samples, y, w, cfg.ridge_lambda)
    pred = samples @ coef + intercept
    ybar = np.average(y, weights=w)
    ss_res = np.sum(w * (y - pred) ** 2)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    weights = {name: float(c)
               for name, c in zip(encoder.feature_names, coef)}
    return FeatureAttribution(weights, intercept, float(r2))

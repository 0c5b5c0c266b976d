"""Training loops for the cough CNN and the context classifier.

Both loops select the checkpoint from the epoch with the best
validation AUC, computed with the same per-individual aggregation the
deployed scorer uses (median over segments, max over samples).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio.dsp import (AudioBuffer, Featurizer, apply_rescale,
                        fit_rescale)
from .augment import (MaskConfig, NoiseBank, NoiseMixConfig, mix_noise,
                      random_crop_2s, spec_augment)
from .errors import TrainingError
from .evaluation import roc_auc
from .inference import median_score, segment_sample
from .nn.checkpoint import Checkpoint
from .nn.layers import softmax_cross_entropy
from .nn.models import CoughNet, ContextNet
from .nn.optim import SGD, AdamW, step_decay_lr


@dataclass
class TrainConfig:
    optimizer: str = "adamw"          # "adamw" | "sgd"
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    lr_decay_factor: float = 0.95
    lr_decay_period: int = 10         # epochs between decay steps
    batch_size: int = 128
    max_epochs: int = 200
    seed: int = 0
    patience: int = 10                # early stop on stale val AUC
    selection_metric: str = "val_auc"
    target_val_auc: float | None = None  # optional early exit

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise TrainingError("learning rate and batch size must be "
                                "positive")
        if self.max_epochs <= 0:
            raise TrainingError("max_epochs must be positive")
        if self.optimizer not in ("adamw", "sgd"):
            raise TrainingError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class CoughExample:
    """One individual's recordings at 16 kHz, with the screening
    label."""
    individual_id: str
    label: int
    samples: list[np.ndarray]  # raw waveforms, each float in [-1,1]


@dataclass
class EpochStats:
    epoch: int
    loss: float
    lr: float
    val_auc: float


def _check_two_classes(labels):
    ys = set(int(y) for y in labels)
    if ys != {0, 1}:
        raise TrainingError(f"training set must contain both classes, "
                            f"got labels {sorted(ys)}")


def _make_optimizer(cfg: TrainConfig, params):
    if cfg.optimizer == "adamw":
        return AdamW(params, lr=cfg.learning_rate,
                     weight_decay=cfg.weight_decay)
    return SGD(params, lr=cfg.learning_rate)


def _val_patches(examples, featurizer, rescale):
    """Featurized segments per validation individual, fixed across
    epochs."""
    out = []
    for ex in examples:
        per_sample = []
        for wav in ex.samples:
            buf = AudioBuffer(wav, 16000)
            per_sample.append(np.stack(
                segment_sample(buf, featurizer, rescale)))
        out.append((ex.label, per_sample))
    return out


def _val_auc_cough(model, cached) -> float:
    scores = []
    labels = []
    for label, per_sample in cached:
        sample_scores = []
        for seg_batch in per_sample:
            p = model.predict_proba(seg_batch[:, None, :, :])[:, 1]
            sample_scores.append(median_score(p))
        scores.append(max(sample_scores))
        labels.append(label)
    return roc_auc(scores, labels)


def fit_rescale_from_examples(examples, featurizer: Featurizer) -> float:
    """Largest |log-mel value| over every training segment, no
    augmentation."""
    def patches():
        for ex in examples:
            for wav in ex.samples:
                buf = AudioBuffer(wav, 16000)
                for patch in segment_sample(buf, featurizer, None):
                    yield patch
    return fit_rescale(patches())


def train_cough(cfg: TrainConfig, train: list[CoughExample],
                val: list[CoughExample], featurizer: Featurizer,
                noise_bank: NoiseBank | None = None,
                noise_cfg: NoiseMixConfig = NoiseMixConfig(),
                mask_cfg: MaskConfig | None = MaskConfig(),
                init_weights: list[np.ndarray] | None = None,
                kind: str = "cough",
                channels=(8, 16, 32, 64), hidden=(32, 16),
                rescale: float | None = None,
                ) -> tuple[Checkpoint, list[EpochStats]]:
    """AdamW training over augmented 2-second crops.

    Per epoch: every training recording contributes one random crop,
    optionally mixed with background noise, then masked in the
    spectrogram domain. The returned checkpoint holds the weights of
    the best-validation-AUC epoch plus everything scoring needs
    (featurizer config and rescale scalar). `init_weights` warm-starts
    from a previous checkpoint, which is how pretrained cough/non-cough
    weights are fine-tuned.
    """
    if not train or not val:
        raise TrainingError("need non-empty train and validation sets")
    _check_two_classes([ex.label for ex in train])

    rng = np.random.default_rng(cfg.seed)
    model = CoughNet(channels=channels, hidden=hidden, seed=cfg.seed)
    if init_weights is not None:
        model.set_weights(init_weights)
    opt = _make_optimizer(cfg, model.params())

    if rescale is None:
        rescale = fit_rescale_from_examples(train, featurizer)
    val_cache = _val_patches(val, featurizer, rescale)

    # flat list of (waveform, label) training instances, one per recording
    instances = [(wav, ex.label) for ex in train for wav in ex.samples]
    n = len(instances)
    batch_size = min(cfg.batch_size, n)

    best_auc = -1.0
    best_weights = model.get_weights()
    best_epoch = -1
    history: list[EpochStats] = []
    stale = 0
    for epoch in range(cfg.max_epochs):
        opt.lr = step_decay_lr(cfg.learning_rate, epoch,
                               cfg.lr_decay_factor, cfg.lr_decay_period)
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            patches = []
            for i in idx:
                wav, _ = instances[i]
                buf = random_crop_2s(AudioBuffer(wav, 16000), rng)
                if noise_bank is not None and \
                        rng.random() < noise_cfg.apply_probability:
                    buf = mix_noise(buf, noise_bank.sample(rng), rng,
                                    noise_cfg)
                patch = apply_rescale(featurizer.patch(buf), rescale)
                if mask_cfg is not None:
                    patch = spec_augment(patch, mask_cfg, rng)
                patches.append(patch)
            x = np.stack(patches)[:, None, :, :]
            y = np.array([instances[i][1] for i in idx], dtype=np.int64)
            logits = model.forward(x, train=True, rng=rng)
            loss, _, dlogits = softmax_cross_entropy(logits, y)
            model.zero_grad()
            model.backward(dlogits)
            opt.step()
            losses.append(loss)
        val_auc = _val_auc_cough(model, val_cache)
        history.append(EpochStats(epoch, float(np.mean(losses)),
                                  opt.lr, val_auc))
        if val_auc > best_auc:
            best_auc = val_auc
            best_weights = model.get_weights()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
        if cfg.target_val_auc is not None and best_auc >= cfg.target_val_auc:
            break
        if stale >= cfg.patience:
            break

    ckpt = Checkpoint(kind=kind, arch=model.arch, weights=best_weights,
                      featurizer_config=featurizer.to_config(),
                      rescale=float(rescale),
                      meta={"epoch": best_epoch, "val_auc": best_auc,
                            "seed": cfg.seed,
                            "epochs_run": len(history)})
    return ckpt, history


def train_context(cfg: TrainConfig, x_train: np.ndarray,
                  y_train: np.ndarray, x_val: np.ndarray,
                  y_val: np.ndarray, encoder_state: dict,
                  hidden: int | None = None,
                  ) -> tuple[Checkpoint, list[EpochStats]]:
    """Mini-batch SGD on encoded context vectors with AUC-based early
    stopping. The encoder state rides along in the checkpoint so the
    scorer can encode raw records identically."""
    if len(x_train) == 0 or len(x_val) == 0:
        raise TrainingError("need non-empty train and validation sets")
    _check_two_classes(y_train)

    rng = np.random.default_rng(cfg.seed)
    model = ContextNet(in_dim=x_train.shape[1], hidden=hidden,
                       seed=cfg.seed)
    opt = _make_optimizer(cfg, model.params())
    n = len(x_train)
    batch_size = min(cfg.batch_size, n)
    y_train = np.asarray(y_train, dtype=np.int64)

    best_auc = -1.0
    best_weights = model.get_weights()
    best_epoch = -1
    history: list[EpochStats] = []
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            logits = model.forward(x_train[idx], train=True, rng=rng)
            loss, _, dlogits = softmax_cross_entropy(logits, y_train[idx])
            model.zero_grad()
            model.backward(dlogits)
            opt.step()
            losses.append(loss)
        val_scores = model.predict_proba(x_val)[:, 1]
        val_auc = roc_auc(val_scores, y_val)
        history.append(EpochStats(epoch, float(np.mean(losses)),
                                  opt.lr, val_auc))
        if val_auc > best_auc:
            best_auc = val_auc
            best_weights = model.get_weights()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
        if cfg.target_val_auc is not None and best_auc >= cfg.target_val_auc:
            break
        if stale >= cfg.patience:
            break

    ckpt = Checkpoint(kind="context", arch=model.arch,
                      weights=best_weights, encoder=encoder_state,
                      meta={"epoch": best_epoch, "val_auc": best_auc,
                            "seed": cfg.seed,
                            "epochs_run": len(history)})
    return ckpt, history

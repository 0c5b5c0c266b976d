"""Training-time augmentations: 2-second cropping, background-noise
mixing, and time/frequency masking of log-mel patches.

Every operation takes an explicit numpy Generator so a seeded worker
reproduces the exact augmentation sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio.dsp import AudioBuffer, PATCH_SAMPLES, load_and_normalize
from .errors import EmptyAudioError


@dataclass(frozen=True)
class NoiseMixConfig:
    factor_min: float = 0.4
    factor_max: float = 0.75
    apply_probability: float = 0.5  # per-sample chance of mixing at all

    def __post_init__(self):
        if not 0 <= self.factor_min <= self.factor_max:
            raise ValueError("need 0 <= factor_min <= factor_max")
        if not 0 <= self.apply_probability <= 1:
            raise ValueError("apply_probability must be in [0, 1]")


@dataclass(frozen=True)
class MaskConfig:
    n_time_masks: int = 2
    max_time_width: int = 20   # frames
    n_freq_masks: int = 2
    max_freq_width: int = 8    # mel bins


def random_crop_2s(buf: AudioBuffer, rng: np.random.Generator) -> AudioBuffer:
    """Exactly 2 seconds: random offset into longer clips, zero right-pad
    for shorter ones."""
    x = buf.samples
    n = len(x)
    if n == PATCH_SAMPLES:
        return buf
    if n < PATCH_SAMPLES:
        out = np.zeros(PATCH_SAMPLES, dtype=x.dtype)
        out[:n] = x
        return AudioBuffer(out, buf.sample_rate_hz)
    start = int(rng.integers(0, n - PATCH_SAMPLES + 1))
    return AudioBuffer(x[start:start + PATCH_SAMPLES].copy(),
                       buf.sample_rate_hz)


def _fit_noise_to(noise: np.ndarray, length: int,
                  rng: np.random.Generator) -> np.ndarray:
    if len(noise) == length:
        return noise
    if len(noise) < length:
        reps = int(np.ceil(length / len(noise)))
        return np.tile(noise, reps)[:length]
    start = int(rng.integers(0, len(noise) - length + 1))
    return noise[start:start + length]


def mix_noise(clean: AudioBuffer, noise: AudioBuffer,
              rng: np.random.Generator,
              cfg: NoiseMixConfig = NoiseMixConfig()) -> AudioBuffer:
    """clean + alpha * noise with alpha ~ U[factor_min, factor_max].

    Noise is looped or randomly cropped to match the clean length;
    the sum is clipped back into [-1, 1].
    """
    if len(noise) == 0:
        raise EmptyAudioError("empty noise buffer")
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError("clean and noise rates differ")
    alpha = rng.uniform(cfg.factor_min, cfg.factor_max)
    fitted = _fit_noise_to(noise.samples, len(clean), rng)
    mixed = np.clip(clean.samples + alpha * fitted, -1.0, 1.0)
    return AudioBuffer(mixed, clean.sample_rate_hz)


def spec_augment(patch: np.ndarray, cfg: MaskConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Mask random time columns and frequency rows with the patch mean.

    Widths are drawn uniformly from [0, max_width]; a zero width is a
    no-op mask, matching the usual masking convention.
    """
    out = patch.copy()
    n_freq, n_time = patch.shape
    fill = float(patch.mean())
    for _ in range(cfg.n_time_masks):
        w = int(rng.integers(0, cfg.max_time_width + 1))
        start = int(rng.integers(0, n_time - w + 1))
        out[:, start:start + w] = fill
    for _ in range(cfg.n_freq_masks):
        w = int(rng.integers(0, cfg.max_freq_width + 1))
        start = int(rng.integers(0, n_freq - w + 1))
        out[start:start + w, :] = fill
    return out


class NoiseBank:
    """Directory of WAV files used as background noise (ESC-50 stand-in)."""

    def __init__(self, directory):
        self.paths = sorted(Path(directory).glob("*.wav"))
        if not self.paths:
            raise FileNotFoundError(f"no .wav files under {directory}")
        self._cache: dict[int, AudioBuffer] = {}

    def sample(self, rng: np.random.Generator) -> AudioBuffer:
        i = int(rng.integers(0, len(self.paths)))
        if i not in self._cache:
            self._cache[i] = load_and_normalize(self.paths[i])
        return self._cache[i]

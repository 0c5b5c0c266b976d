"""Log-melspectrogram featurization.

Fixed production chain: mono 16 kHz audio -> centered magnitude STFT
(hamming 512 / hop 160 / 512-point FFT, reflection padding) -> 64
triangular mel filters between 125 Hz and 7.5 kHz -> natural log with a
1e-10 floor -> global rescale into [-1, 1] using the training-set max.
A 2-second clip maps to a 257x201 spectrogram and a 64x201 patch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import EmptyAudioError, FilterbankError
from .resample import resample
from .wavio import read_wav

TARGET_SAMPLE_RATE = 16000
PATCH_SECONDS = 2.0
PATCH_SAMPLES = int(PATCH_SECONDS * TARGET_SAMPLE_RATE)  # 32000
LOG_EPS = 1e-10


@dataclass(frozen=True)
class AudioBuffer:
    """Mono waveform with its sample rate; amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer is mono; got multi-channel data")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioBuffer requires finite sample values")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class StftConfig:
    window_len_samples: int = 512   # 32 ms at 16 kHz
    hop_samples: int = 160          # 10 ms
    fft_size: int = 512
    window: str = "hamming"
    centered: bool = True

    def __post_init__(self):
        if self.window_len_samples > self.fft_size:
            raise ValueError("window longer than FFT size")
        if self.hop_samples < 1:
            raise ValueError("hop must be >= 1")

    @property
    def freq_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 64
    f_min_hz: float = 125.0
    f_max_hz: float = 7500.0
    sample_rate_hz: int = TARGET_SAMPLE_RATE
    mel_scale: str = "htk"

    def __post_init__(self):
        if not (0 <= self.f_min_hz < self.f_max_hz <= self.sample_rate_hz / 2):
            raise ValueError("need 0 <= f_min < f_max <= nyquist")
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")


def hz_to_mel(f, scale: str = "htk"):
    if scale == "htk":
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)
    if scale == "slaney":
        f = np.asarray(f, dtype=np.float64)
        lin = f / (200.0 / 3.0)
        log_region = f >= 1000.0
        mel = np.where(
            log_region,
            15.0 + np.log(np.maximum(f, 1e-12) / 1000.0) / (np.log(6.4) / 27.0),
            lin,
        )
        return mel
    raise ValueError(f"unknown mel scale {scale!r}")


def mel_to_hz(m, scale: str = "htk"):
    if scale == "htk":
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)
    if scale == "slaney":
        m = np.asarray(m, dtype=np.float64)
        log_region = m >= 15.0
        return np.where(
            log_region,
            1000.0 * np.exp((m - 15.0) * (np.log(6.4) / 27.0)),
            m * (200.0 / 3.0),
        )
    raise ValueError(f"unknown mel scale {scale!r}")


def normalize_waveform(samples: np.ndarray, rate: int,
                       name: str = "<memory>") -> AudioBuffer:
    """Mono 16 kHz in [-1, 1]: stereo averaged across channels, other
    rates through the windowed-sinc resampler."""
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if rate != TARGET_SAMPLE_RATE:
        samples = resample(samples, rate, TARGET_SAMPLE_RATE)
    if len(samples) == 0:
        raise EmptyAudioError(f"{name}: empty after resampling")
    return AudioBuffer(np.clip(samples, -1.0, 1.0), TARGET_SAMPLE_RATE)


def load_and_normalize(path) -> AudioBuffer:
    """Load a WAV file as mono 16 kHz with amplitudes in [-1, 1]."""
    samples, rate = read_wav(path)
    return normalize_waveform(samples, rate, name=str(path))


def _window_values(cfg: StftConfig) -> np.ndarray:
    if cfg.window != "hamming":
        raise ValueError(f"unsupported window {cfg.window!r}")
    n = np.arange(cfg.window_len_samples)
    # Periodic variant, the usual choice for spectral analysis.
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / cfg.window_len_samples)


def stft(buf: AudioBuffer, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Magnitude STFT, shape [freq_bins, frames].

    Centered framing: the signal is reflection-padded by half a window on
    both ends, giving 1 + floor(len/hop) frames.
    """
    x = np.asarray(buf.samples, dtype=np.float64)
    if len(x) < 2:
        raise EmptyAudioError("need at least 2 samples for an STFT")
    win = _window_values(cfg)
    half = cfg.window_len_samples // 2
    if cfg.centered:
        x = np.pad(x, (half, half), mode="reflect")
        n_frames = 1 + (len(buf.samples)) // cfg.hop_samples
    else:
        n_frames = 1 + (len(x) - cfg.window_len_samples) // cfg.hop_samples
    starts = np.arange(n_frames) * cfg.hop_samples
    frames = np.lib.stride_tricks.sliding_window_view(
        x, cfg.window_len_samples)[starts]
    spec = np.fft.rfft(frames * win, n=cfg.fft_size, axis=1)
    return np.abs(spec).T


def mel_filterbank(cfg: MelConfig = MelConfig(), freq_bins: int = 257,
                   fft_size: int = 512) -> np.ndarray:
    """Triangular mel filterbank, shape [n_mels, freq_bins].

    Filter centers are equally spaced on the mel scale between
    mel(f_min) and mel(f_max). Raises FilterbankError if any filter has
    empty support at this bin resolution.
    """
    mel_lo = hz_to_mel(cfg.f_min_hz, cfg.mel_scale)
    mel_hi = hz_to_mel(cfg.f_max_hz, cfg.mel_scale)
    mel_points = np.linspace(mel_lo, mel_hi, cfg.n_mels + 2)
    hz_points = mel_to_hz(mel_points, cfg.mel_scale)

    bin_freqs = np.arange(freq_bins) * cfg.sample_rate_hz / fft_size
    fb = np.zeros((cfg.n_mels, freq_bins))
    for m in range(cfg.n_mels):
        f_lo, f_c, f_hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (bin_freqs - f_lo) / (f_c - f_lo)
        down = (f_hi - bin_freqs) / (f_hi - f_c)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
        if not np.any(fb[m] > 0):
            raise FilterbankError(
                f"mel filter {m} has empty support; lower n_mels or widen "
                f"the frequency range")
    return fb


def log_mel(spec: np.ndarray, fb: np.ndarray) -> np.ndarray:
    """ln(filterbank @ magnitudes + eps), shape [n_mels, frames]."""
    if fb.shape[1] != spec.shape[0]:
        raise ValueError(
            f"filterbank expects {fb.shape[1]} bins, spectrogram has "
            f"{spec.shape[0]}")
    return np.log(fb @ spec + LOG_EPS)


def fit_rescale(train_patches: Iterable[np.ndarray]) -> float:
    """Largest |value| over a stream of patches; the global rescale scalar."""
    scale = 0.0
    seen = False
    for patch in train_patches:
        seen = True
        scale = max(scale, float(np.max(np.abs(patch))))
    if not seen:
        raise ValueError("fit_rescale needs at least one patch")
    if scale == 0.0:
        raise ValueError("all-zero patches; rescale undefined")
    return scale


def apply_rescale(patch: np.ndarray, scale: float) -> np.ndarray:
    """Divide by the training max and clamp held-out excursions to [-1, 1]."""
    return np.clip(patch / scale, -1.0, 1.0)


@dataclass
class Featurizer:
    """Bundles the STFT + mel stages and caches the filterbank."""

    stft_cfg: StftConfig = field(default_factory=StftConfig)
    mel_cfg: MelConfig = field(default_factory=MelConfig)

    def __post_init__(self):
        self._fb = mel_filterbank(
            self.mel_cfg, self.stft_cfg.freq_bins, self.stft_cfg.fft_size)

    def patch(self, buf: AudioBuffer) -> np.ndarray:
        """Unscaled log-mel patch [n_mels, frames] for one buffer."""
        return log_mel(stft(buf, self.stft_cfg), self._fb)

    def to_config(self) -> dict:
        s, m = self.stft_cfg, self.mel_cfg
        return {
            "window_len_samples": s.window_len_samples,
            "hop_samples": s.hop_samples,
            "fft_size": s.fft_size,
            "window": s.window,
            "centered": s.centered,
            "n_mels": m.n_mels,
            "f_min_hz": m.f_min_hz,
            "f_max_hz": m.f_max_hz,
            "sample_rate_hz": m.sample_rate_hz,
            "mel_scale": m.mel_scale,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Featurizer":
        return cls(
            StftConfig(
                window_len_samples=int(cfg["window_len_samples"]),
                hop_samples=int(cfg["hop_samples"]),
                fft_size=int(cfg["fft_size"]),
                window=cfg["window"],
                centered=bool(cfg["centered"]),
            ),
            MelConfig(
                n_mels=int(cfg["n_mels"]),
                f_min_hz=float(cfg["f_min_hz"]),
                f_max_hz=float(cfg["f_max_hz"]),
                sample_rate_hz=int(cfg["sample_rate_hz"]),
                mel_scale=cfg.get("mel_scale", "htk"),
            ),
        )

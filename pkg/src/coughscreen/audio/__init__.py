from .wavio import read_wav, write_wav
from .resample import resample
from .dsp import (
    AudioBuffer,
    StftConfig,
    MelConfig,
    Featurizer,
    TARGET_SAMPLE_RATE,
    PATCH_SAMPLES,
    load_and_normalize,
    stft,
    mel_filterbank,
    log_mel,
    fit_rescale,
    apply_rescale,
)
from .tensorfile import write_tensor, read_tensor

__all__ = [
    "read_wav",
    "write_wav",
    "resample",
    "AudioBuffer",
    "StftConfig",
    "MelConfig",
    "Featurizer",
    "TARGET_SAMPLE_RATE",
    "PATCH_SAMPLES",
    "load_and_normalize",
    "stft",
    "mel_filterbank",
    "log_mel",
    "fit_rescale",
    "apply_rescale",
    "write_tensor",
    "read_tensor",
]

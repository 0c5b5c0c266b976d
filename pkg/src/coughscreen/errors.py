"""Exception types shared across the pipeline."""


class CoughScreenError(Exception):
    """Base class for all pipeline errors."""


class AudioReadError(CoughScreenError):
    """File missing, truncated, or not a parseable RIFF/WAVE stream."""


class UnsupportedAudioError(CoughScreenError):
    """WAV encoding outside the supported PCM int / float32 set."""


class EmptyAudioError(CoughScreenError):
    """Zero-length audio payload."""


class ManifestError(CoughScreenError):
    """Manifest row rejected; message carries the offending line number."""


class SplitError(CoughScreenError):
    """Split preconditions violated (empty set, bad ratios, unknown site)."""


class FilterbankError(CoughScreenError):
    """Degenerate mel configuration (some filter has empty support)."""


class CheckpointError(CoughScreenError):
    """Bad magic, version mismatch, or truncated checkpoint payload."""


class MetricError(CoughScreenError):
    """Metric undefined for the given inputs (e.g. single-class AUC)."""


class TrainingError(CoughScreenError):
    """Training cannot proceed (degenerate labels, non-finite gradients)."""


class ExplainError(CoughScreenError):
    """Explanation cannot be computed (NaN weights, degenerate kernel)."""

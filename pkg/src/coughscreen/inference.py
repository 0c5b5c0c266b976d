"""Individual-level inference.

A sample is cut into 2-second segments (500 ms hop, zero-padded when
shorter than 2 s), each segment is scored by the cough model, the
sample score is the median over segments, the individual score is the
max over its samples, and the final prediction averages the cough and
context probabilities when both are available.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio.dsp import (AudioBuffer, Featurizer, PATCH_SAMPLES,
                        apply_rescale, load_and_normalize)
from .cohort import Cohort, SplitAssignment, encode_context, is_symptomatic
from .errors import CoughScreenError
from .nn.checkpoint import Checkpoint

SEGMENT_HOP_SAMPLES = 8000  # 500 ms at 16 kHz


def segment_count(n_samples: int) -> int:
    """Number of sliding 2-s windows; short inputs yield one padded
    segment."""
    if n_samples < PATCH_SAMPLES:
        return 1
    return 1 + (n_samples - PATCH_SAMPLES) // SEGMENT_HOP_SAMPLES


def segment_sample(buf: AudioBuffer, featurizer: Featurizer,
                   rescale: float | None = None) -> list[np.ndarray]:
    """Featurized 2-second segments of one recording."""
    x = buf.samples
    n = len(x)
    segments = []
    if n < PATCH_SAMPLES:
        padded = np.zeros(PATCH_SAMPLES, dtype=x.dtype)
        padded[:n] = x
        windows = [padded]
    else:
        windows = [x[s:s + PATCH_SAMPLES]
                   for s in range(0, n - PATCH_SAMPLES + 1,
                                  SEGMENT_HOP_SAMPLES)]
    for w in windows:
        patch = featurizer.patch(AudioBuffer(w, buf.sample_rate_hz))
        if rescale is not None:
            patch = apply_rescale(patch, rescale)
        segments.append(patch)
    return segments


def median_score(segment_scores) -> float:
    """Median; an even count averages the two middle values."""
    return float(np.median(np.asarray(segment_scores, dtype=np.float64)))


def score_segments(model, patches: list[np.ndarray]) -> np.ndarray:
    batch = np.stack(patches)[:, None, :, :]
    return model.predict_proba(batch)[:, 1]


def score_sample(model, buf: AudioBuffer, featurizer: Featurizer,
                 rescale: float | None = None) -> float:
    """Median positive-class probability over the sample's segments."""
    patches = segment_sample(buf, featurizer, rescale)
    return median_score(score_segments(model, patches))


def score_individual(model, samples: list[AudioBuffer],
                     featurizer: Featurizer,
                     rescale: float | None = None) -> float:
    """Max over per-sample scores."""
    if not samples:
        raise ValueError("need at least one sample")
    return max(score_sample(model, s, featurizer, rescale) for s in samples)


def ensemble(p_cough: float | None, p_context: float | None
             ) -> tuple[float, str | None]:
    """Mean of the two probabilities; a missing modality passes the
    other through with a flag."""
    if p_cough is not None and p_context is not None:
        return (p_cough + p_context) / 2.0, None
    if p_cough is not None:
        return p_cough, "cough-only"
    if p_context is not None:
        return p_context, "context-only"
    raise ValueError("no modality to ensemble")


@dataclass
class IndividualPrediction:
    individual_id: str
    p_cough: float | None = None
    p_context: float | None = None
    p_ensemble: float | None = None
    flag: str | None = None
    label: int | None = None
    symptomatic: bool | None = None
    error: str | None = None

    def to_json_obj(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class CoughScorer:
    """Checkpointed cough model plus its featurization settings."""

    model: object
    featurizer: Featurizer
    rescale: float

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "CoughScorer":
        if ckpt.kind != "cough":
            raise ValueError(f"expected a cough checkpoint, got {ckpt.kind}")
        if ckpt.featurizer_config is None or ckpt.rescale is None:
            raise ValueError("cough checkpoint lacks featurizer/rescale")
        return cls(ckpt.build_model(),
                   Featurizer.from_config(ckpt.featurizer_config),
                   float(ckpt.rescale))

    def score_buffers(self, samples: list[AudioBuffer]) -> float:
        return score_individual(self.model, samples, self.featurizer,
                                self.rescale)


@dataclass
class ContextScorer:
    model: object
    encoder: object  # EncoderState

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "ContextScorer":
        from .cohort import EncoderState
        if ckpt.kind != "context":
            raise ValueError(f"expected a context checkpoint, "
                             f"got {ckpt.kind}")
        if ckpt.encoder is None:
            raise ValueError("context checkpoint lacks encoder state")
        return cls(ckpt.build_model(), EncoderState.from_dict(ckpt.encoder))

    def score_record(self, context_record) -> float:
        vec = encode_context(context_record, self.encoder)
        return float(self.model.predict_proba(vec[None, :])[0, 1])


def predict_individual(record, cough: CoughScorer | None,
                       context: ContextScorer | None,
                       audio_root=None) -> IndividualPrediction:
    pred = IndividualPrediction(record.individual_id, label=record.label,
                                symptomatic=is_symptomatic(record.context))
    p_cough = None
    p_context = None
    if cough is not None:
        try:
            buffers = []
            for rel in record.cough_sample_paths:
                path = rel if audio_root is None else f"{audio_root}/{rel}"
                buffers.append(load_and_normalize(path))
            p_cough = cough.score_buffers(buffers)
        except CoughScreenError as exc:
            pred.error = str(exc)
            return pred
    if context is not None:
        p_context = context.score_record(record.context)
    pred.p_cough = p_cough
    pred.p_context = p_context
    pred.p_ensemble, pred.flag = ensemble(p_cough, p_context)
    return pred


def predict_cohort(cohort: Cohort, assignment: SplitAssignment | None,
                   set_name: str | None,
                   cough: CoughScorer | None,
                   context: ContextScorer | None,
                   audio_root=None, workers: int = 1
                   ) -> list[IndividualPrediction]:
    """One prediction per individual, in cohort order.

    Individuals whose audio cannot be read come back with an error
    status instead of failing the batch.
    """
    if cough is None and context is None:
        raise ValueError("need at least one scorer")
    records = cohort.records
    if assignment is not None and set_name is not None:
        wanted = {i for i, s in assignment.assignment.items()
                  if s == set_name}
        records = [r for r in records if r.individual_id in wanted]

    def job(rec):
        return predict_individual(rec, cough, context, audio_root)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, records))
    return [job(r) for r in records]


def write_predictions(path, predictions: list[IndividualPrediction]):
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p.to_json_obj(), sort_keys=True))
            fh.write("\n")


def read_predictions(path) -> list[IndividualPrediction]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(IndividualPrediction(**json.loads(line)))
    return out

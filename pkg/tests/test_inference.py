import json

import numpy as np
import pytest

from coughscreen.audio.dsp import AudioBuffer, Featurizer
from coughscreen.cohort import ContextRecord
from coughscreen.inference import (IndividualPrediction, ensemble,
                                   median_score, read_predictions,
                                   score_individual, score_sample,
                                   segment_count, segment_sample,
                                   write_predictions)

RATE = 16000
WINDOW = 32000
HOP = 8000


def loop_segment_counter(n: int) -> int:
    """Walk the hops one by one; the reference for the closed form."""
    if n < WINDOW:
        return 1
    count = 0
    start = 0
    while start + WINDOW <= n:
        count += 1
        start += HOP
    return count


def test_segment_count_matches_loop_oracle():
    durations = np.arange(0.1, 30.0001, 0.1)
    for dur in durations:
        n = int(round(dur * RATE))
        assert segment_count(n) == loop_segment_counter(n), f"{dur:.1f}s"


def test_segment_boundaries():
    assert segment_count(WINDOW) == 1
    assert segment_count(WINDOW - 1) == 1          # padded
    assert segment_count(WINDOW + HOP) == 2
    assert segment_count(WINDOW + HOP - 1) == 1
    assert segment_count(48000) == 3               # 3.0 s


def test_segment_sample_shapes_and_padding():
    feat = Featurizer()
    buf = AudioBuffer(np.random.default_rng(0).uniform(-1, 1, 19200),
                      RATE)  # 1.2 s
    segs = segment_sample(buf, feat)
    assert len(segs) == 1
    assert segs[0].shape == (64, 201)

    buf3 = AudioBuffer(np.random.default_rng(1).uniform(-1, 1, 48000),
                       RATE)
    assert len(segment_sample(buf3, feat)) == 3


def test_padding_matches_explicit_zero_fill():
    feat = Featurizer()
    x = np.random.default_rng(2).uniform(-1, 1, 19200)
    padded = np.zeros(WINDOW)
    padded[:len(x)] = x
    a = segment_sample(AudioBuffer(x, RATE), feat)[0]
    b = feat.patch(AudioBuffer(padded, RATE))
    assert np.array_equal(a, b)


def test_median_rules():
    assert median_score([0.2, 0.7, 0.4]) == pytest.approx(0.4)
    assert median_score([0.2, 0.4]) == pytest.approx(0.3)
    assert median_score([0.9]) == pytest.approx(0.9)


def test_median_permutation_invariant():
    rng = np.random.default_rng(3)
    for _ in range(20):
        vals = rng.uniform(0, 1, int(rng.integers(1, 9)))
        base = median_score(vals)
        assert median_score(rng.permutation(vals)) == pytest.approx(base)


class StubModel:
    """Returns queued per-call probabilities; one call per sample."""

    def __init__(self, per_call):
        self.per_call = list(per_call)
        self.calls = 0

    def predict_proba(self, batch):
        p = self.per_call[self.calls]
        self.calls += 1
        out = np.full((len(batch), 2), 0.0)
        out[:, 1] = p
        out[:, 0] = 1 - out[:, 1]
        return out


def test_score_individual_max_rule():
    feat = Featurizer()
    rng = np.random.default_rng(4)
    samples = [AudioBuffer(rng.uniform(-1, 1, WINDOW), RATE)
               for _ in range(3)]
    model = StubModel([0.1, 0.2, 0.3])
    assert score_individual(model, samples, feat) == pytest.approx(0.3)


def test_score_individual_permutation_invariant():
    feat = Featurizer()
    rng = np.random.default_rng(5)
    samples = [AudioBuffer(rng.uniform(-1, 1, WINDOW), RATE)
               for _ in range(3)]
    a = score_individual(StubModel([0.5, 0.9, 0.2]), samples, feat)
    b = score_individual(StubModel([0.9, 0.2, 0.5]),
                         samples[::-1], feat)
    assert a == pytest.approx(b) == pytest.approx(0.9)


def test_score_individual_rejects_empty():
    with pytest.raises(ValueError):
        score_individual(StubModel([0.5]), [], Featurizer())


def test_median_monotonicity():
    rng = np.random.default_rng(6)
    for _ in range(30):
        vals = rng.uniform(0, 1, 5)
        base = median_score(vals)
        bumped = np.clip(vals + rng.uniform(0, 0.2, 5), 0, 1)
        assert median_score(bumped) >= base - 1e-12


def test_ensemble_mean_and_passthrough():
    p, flag = ensemble(0.6, 0.8)
    assert p == pytest.approx(0.7) and flag is None
    p, flag = ensemble(0.55, None)
    assert p == pytest.approx(0.55) and flag == "cough-only"
    p, flag = ensemble(None, 0.4)
    assert p == pytest.approx(0.4) and flag == "context-only"
    with pytest.raises(ValueError):
        ensemble(None, None)


def test_ensemble_idempotent_and_bounded():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b = rng.uniform(0, 1, 2)
        p, _ = ensemble(a, b)
        assert min(a, b) - 1e-12 <= p <= max(a, b) + 1e-12
    assert ensemble(0.37, 0.37)[0] == pytest.approx(0.37)


def test_predictions_jsonl_round_trip(tmp_path):
    preds = [IndividualPrediction("a", 0.1, 0.2, 0.15, None, 1, True),
             IndividualPrediction("b", None, 0.5, 0.5, "context-only",
                                  0, False)]
    path = tmp_path / "preds.jsonl"
    write_predictions(path, preds)
    back = read_predictions(path)
    assert back == preds
    # rerun produces identical bytes
    first = path.read_bytes()
    write_predictions(path, preds)
    assert path.read_bytes() == first

import json
import time
from pathlib import Path

import numpy as np
import pytest

from coughscreen.audio.dsp import Featurizer, load_and_normalize
from coughscreen.augment import NoiseBank
from coughscreen.cohort import (encode_cohort, fit_context_encoder,
                                ingest_manifest, split_random)
from coughscreen.nn.checkpoint import save_checkpoint
from coughscreen.synthdata import make_audio_corpus, make_context_cohort
from coughscreen.training import (CoughExample, TrainConfig, train_context,
                                  train_cough)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """200-individual separable audio corpus shared by the slow tests."""
    root = tmp_path_factory.mktemp("corpus")
    make_audio_corpus(root, n_individuals=200, seed=0)
    return root


@pytest.fixture(scope="session")
def corpus_cohort(corpus_dir):
    return ingest_manifest(corpus_dir / "manifest.jsonl")


@pytest.fixture(scope="session")
def corpus_split(corpus_cohort):
    return split_random(corpus_cohort, seed=11)


def load_examples(cohort, split, set_name, root):
    wanted = set(split.ids_in(set_name))
    out = []
    for rec in cohort.records:
        if rec.individual_id not in wanted:
            continue
        waves = [load_and_normalize(Path(root) / rel).samples
                 for rel in rec.cough_sample_paths]
        out.append(CoughExample(rec.individual_id, rec.label, waves))
    return out


@pytest.fixture(scope="session")
def cough_training(corpus_dir, corpus_cohort, corpus_split,
                   tmp_path_factory):
    """The one expensive training run; several acceptance checks share
    its result. Times the run for the budget assertion."""
    featurizer = Featurizer()
    train = load_examples(corpus_cohort, corpus_split, "train", corpus_dir)
    val = load_examples(corpus_cohort, corpus_split, "validation",
                        corpus_dir)
    noise = NoiseBank(corpus_dir / "noise")
    cfg = TrainConfig(max_epochs=50, seed=3, batch_size=128,
                      target_val_auc=0.97, patience=15)
    started = time.perf_counter()
    ckpt, history = train_cough(cfg, train, val, featurizer,
                                noise_bank=noise)
    duration = time.perf_counter() - started
    path = tmp_path_factory.mktemp("ckpt") / "cough.ckpt"
    save_checkpoint(ckpt, path)
    return {"ckpt": ckpt, "path": path, "duration_s": duration,
            "history": history, "featurizer": featurizer}


@pytest.fixture(scope="session")
def context_cohort():
    return make_context_cohort(n=400, seed=5)


@pytest.fixture(scope="session")
def context_training(context_cohort, tmp_path_factory):
    """Context-model run on the separable table, timed and saved so the
    parity checks can load it from disk."""
    import numpy as np

    split = split_random(context_cohort, seed=2)
    by_id = context_cohort.by_id

    def recs(name):
        return [by_id[i] for i in split.ids_in(name)]

    train, val = recs("train"), recs("validation")
    enc = fit_context_encoder([r.context for r in train])
    x_train = encode_cohort([r.context for r in train], enc)
    y_train = np.array([r.label for r in train])
    x_val = encode_cohort([r.context for r in val], enc)
    y_val = np.array([r.label for r in val])
    cfg = TrainConfig(optimizer="sgd", learning_rate=1e-2,
                      max_epochs=200, patience=15, seed=4)
    started = time.perf_counter()
    ckpt, history = train_context(cfg, x_train, y_train, x_val, y_val,
                                  enc.to_dict())
    duration = time.perf_counter() - started
    path = tmp_path_factory.mktemp("ckpt-ctx") / "context.ckpt"
    save_checkpoint(ckpt, path)
    return {"ckpt": ckpt, "path": path, "duration_s": duration,
            "history": history}


@pytest.fixture(scope="session")
def burst_events(corpus_dir):
    with open(corpus_dir / "events.json", "r", encoding="utf-8") as fh:
        return json.load(fh)

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from coughscreen.audio.dsp import Featurizer
from coughscreen.audio.wavio import write_wav
from coughscreen.cohort import fit_context_encoder
from coughscreen.nn.checkpoint import Checkpoint, save_checkpoint
from coughscreen.nn.models import ContextNet, CoughNet
from coughscreen.service import (ScoringBundle, create_app, load_bundle,
                                 score_inputs)
from coughscreen.synthdata import make_context_cohort

CONTEXT = {"age": 34, "temperature": 37.9, "days_cough": 3,
           "has_cough": "yes", "has_fever": "yes", "has_sob": "no",
           "contact_confirmed": "no", "is_health_worker": "no",
           "travel_history": "no"}


@pytest.fixture(scope="module")
def ckpt_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc-models")
    feat = Featurizer()
    net = CoughNet(channels=(4, 4, 8, 8), hidden=(8,), seed=1)
    save_checkpoint(Checkpoint(kind="cough", arch=net.arch,
                               weights=net.get_weights(),
                               featurizer_config=feat.to_config(),
                               rescale=1.0, meta={"epoch": 0}),
                    root / "cough.ckpt")
    cohort = make_context_cohort(n=40, seed=2)
    enc = fit_context_encoder([r.context for r in cohort.records])
    cnet = ContextNet(in_dim=enc.dim, seed=3)
    save_checkpoint(Checkpoint(kind="context", arch=cnet.arch,
                               weights=cnet.get_weights(),
                               encoder=enc.to_dict(), meta={"epoch": 0}),
                    root / "context.ckpt")
    return root / "cough.ckpt", root / "context.ckpt"


@pytest.fixture(scope="module")
def client(ckpt_paths):
    return TestClient(create_app(*ckpt_paths))


@pytest.fixture(scope="module")
def wav_bytes(tmp_path_factory):
    rng = np.random.default_rng(4)
    path = tmp_path_factory.mktemp("svc-audio") / "clip.wav"
    write_wav(path, 0.2 * rng.standard_normal(int(16000 * 2.2)), 16000)
    return path.read_bytes()


def _audio(blob, k=1):
    return [("audio", (f"clip{i}.wav", blob, "audio/wav"))
            for i in range(k)]


def test_health_reports_versions(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert set(body["model_versions"]) == {"cough", "context"}
    assert body["model_versions"]["cough"].startswith("cough-")


def test_score_both_modalities(client, wav_bytes):
    r = client.post("/v1/score", files=_audio(wav_bytes),
                    data={"context": json.dumps(CONTEXT)})
    assert r.status_code == 200
    body = r.json()
    assert 0.0 <= body["p_cough"] <= 1.0
    assert 0.0 <= body["p_context"] <= 1.0
    assert body["p_ensemble"] == pytest.approx(
        (body["p_cough"] + body["p_context"]) / 2.0)
    assert body["flag"] is None
    assert body["symptomatic"] is True
    assert set(body["model_versions"]) == {"cough", "context"}
    assert body["timing_ms"] > 0


def test_context_only_flags_missing_audio(client):
    ctx = dict(CONTEXT, has_cough="no", has_fever="no", has_sob="no")
    r = client.post("/v1/score", data={"context": json.dumps(ctx)})
    assert r.status_code == 200
    body = r.json()
    assert body["p_cough"] is None
    assert body["flag"] == "context-only"
    assert body["p_ensemble"] == body["p_context"]
    assert body["symptomatic"] is False


def test_audio_only_flags_missing_context(client, wav_bytes):
    r = client.post("/v1/score", files=_audio(wav_bytes, k=3))
    assert r.status_code == 200
    body = r.json()
    assert body["p_context"] is None
    assert body["flag"] == "cough-only"
    assert body["p_ensemble"] == body["p_cough"]
    assert body["symptomatic"] is None


def test_too_many_audio_parts(client, wav_bytes):
    r = client.post("/v1/score", files=_audio(wav_bytes, k=4))
    assert r.status_code == 400
    assert "at most 3" in r.json()["detail"]


def test_undecodable_audio_is_422(client):
    r = client.post("/v1/score",
                    files=[("audio", ("x.wav", b"not a wav", "audio/wav"))])
    assert r.status_code == 422


def test_bad_context_json_is_400(client):
    r = client.post("/v1/score", data={"context": "{nope"})
    assert r.status_code == 400
    r = client.post("/v1/score", data={"context": "[1,2]"})
    assert r.status_code == 400
    r = client.post("/v1/score",
                    data={"context": json.dumps({"travel_history": "mars"})})
    assert r.status_code == 400


def test_empty_request_is_400(client):
    r = client.post("/v1/score")
    assert r.status_code == 400
    assert "nothing to score" in r.json()["detail"]


def test_string_audio_field_is_400(client):
    r = client.post("/v1/score", data={"audio": "not-a-file"})
    assert r.status_code == 400


def test_deferred_load_gives_503_until_startup(ckpt_paths, wav_bytes):
    app = create_app(*ckpt_paths, defer_load=True)
    bare = TestClient(app)
    assert bare.get("/v1/health").json()["status"] == "loading"
    assert bare.post("/v1/score", files=_audio(wav_bytes)).status_code == 503
    with TestClient(app) as started:
        assert started.get("/v1/health").json()["status"] == "ok"
        assert started.post("/v1/score",
                            files=_audio(wav_bytes)).status_code == 200


def test_audit_log_appends_one_line_per_request(ckpt_paths, wav_bytes,
                                                tmp_path):
    log = tmp_path / "audit.jsonl"
    client = TestClient(create_app(*ckpt_paths, audit_log=log))
    client.post("/v1/score", files=_audio(wav_bytes, k=2),
                data={"context": json.dumps(CONTEXT)})
    client.post("/v1/score", data={"context": json.dumps(CONTEXT)})
    lines = log.read_text().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["n_audio"] == 2 and first["has_context"] is True
    assert 0.0 <= first["p_ensemble"] <= 1.0


def test_http_matches_direct_scoring(ckpt_paths, client, wav_bytes):
    bundle = load_bundle(*ckpt_paths)
    direct = score_inputs(bundle, [("clip0.wav", wav_bytes)], CONTEXT)
    r = client.post("/v1/score", files=_audio(wav_bytes),
                    data={"context": json.dumps(CONTEXT)})
    body = r.json()
    for key in ("p_cough", "p_context", "p_ensemble", "flag",
                "symptomatic"):
        assert body[key] == direct[key]
    assert body["model_versions"] == direct["model_versions"]


def test_bundle_requires_a_model():
    with pytest.raises(ValueError):
        load_bundle(None, None)
    with pytest.raises(ValueError):
        score_inputs(ScoringBundle(), [], None)

import json
import shutil

import numpy as np
import pytest

from coughscreen.audio.tensorfile import read_tensor
from coughscreen.cli import main
from coughscreen.inference import read_predictions
from coughscreen.nn.checkpoint import load_checkpoint


def run_ok(argv):
    assert main(argv) == 0


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small end-to-end run shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    run_ok(["synth-corpus", "--out", str(corpus), "--n", "40",
            "--seed", "1"])
    manifest = corpus / "manifest.jsonl"
    split = root / "split.json"
    run_ok(["split", "--manifest", str(manifest), "--strategy", "random",
            "--seed", "1", "--out", str(split)])
    ctx_ckpt = root / "context.ckpt"
    run_ok(["train", "context", "--manifest", str(manifest),
            "--split", str(split), "--epochs", "60", "--patience", "60",
            "--out", str(ctx_ckpt)])
    cough_ckpt = root / "cough.ckpt"
    run_ok(["train", "cough", "--manifest", str(manifest),
            "--root", str(corpus), "--split", str(split),
            "--noise-dir", str(corpus / "noise"), "--epochs", "2",
            "--out", str(cough_ckpt)])
    wav = next(iter(sorted((corpus / "audio").glob("*.wav"))))
    return {"root": root, "corpus": corpus, "manifest": manifest,
            "split": split, "context": ctx_ckpt, "cough": cough_ckpt,
            "wav": wav}


def test_label_noise_prints_reference_values(capsys):
    run_ok(["label-noise", "--sn", "0.70", "--sp", "0.95",
            "--prevalence", "0.10"])
    out = capsys.readouterr().out
    assert "0.885" in out
    assert "0.3913" in out and "0.6087" in out


def test_split_runs_are_byte_identical(pipeline, tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for out in (a, b):
        run_ok(["split", "--manifest", str(pipeline["manifest"]),
                "--strategy", "random", "--seed", "7", "--out", str(out)])
    assert a.read_bytes() == b.read_bytes()


def test_time_and_site_splits_from_cli(pipeline, tmp_path):
    out = tmp_path / "t.json"
    run_ok(["split", "--manifest", str(pipeline["manifest"]),
            "--strategy", "time", "--out", str(out)])
    assert json.loads(out.read_text())["strategy"] == "time"
    run_ok(["split", "--manifest", str(pipeline["manifest"]),
            "--strategy", "site", "--site-fraction", "0.25",
            "--out", str(out)])
    assert json.loads(out.read_text())["strategy"] == "site"


def test_featurize_writes_segment_cache(pipeline, tmp_path, capsys):
    out = tmp_path / "feat"
    run_ok(["featurize", "--manifest", str(pipeline["manifest"]),
            "--root", str(pipeline["corpus"]), "--out", str(out)])
    meta = json.loads((out / "index.json").read_text())
    assert meta["rescale"] > 0
    assert meta["featurizer"]["n_mels"] == 64
    one = next(iter(meta["samples"].values()))
    segs = read_tensor(out / one["file"])
    assert segs.shape[1:] == (64, 201)
    assert segs.shape[0] == one["segments"]


def test_trained_checkpoints_load(pipeline):
    cough = load_checkpoint(pipeline["cough"])
    assert cough.kind == "cough" and cough.rescale > 0
    ctx = load_checkpoint(pipeline["context"])
    assert ctx.kind == "context"
    # synthetic context is separable; the small val set should be easy
    assert ctx.meta["val_auc"] >= 0.99


def test_evaluate_writes_report_and_predictions(pipeline, tmp_path,
                                                capsys):
    report = tmp_path / "report.json"
    preds = tmp_path / "preds.jsonl"
    roc = tmp_path / "roc.csv"
    argv = ["evaluate", "--manifest", str(pipeline["manifest"]),
            "--root", str(pipeline["corpus"]),
            "--split", str(pipeline["split"]), "--set", "test",
            "--cough", str(pipeline["cough"]),
            "--context", str(pipeline["context"]),
            "--out", str(report), "--predictions", str(preds),
            "--roc-csv", str(roc)]
    run_ok(argv)
    out = capsys.readouterr().out
    assert "ensemble" in out and "all (n=4" in out
    body = json.loads(report.read_text())
    assert set(body["cells"]) == {"cough", "context", "ensemble"}
    rows = read_predictions(preds)
    assert len(rows) == 4
    assert all(r.p_ensemble is not None for r in rows)
    header = roc.read_text().splitlines()[0]
    assert header.split(",")[:2] == ["fpr", "tpr"]
    # rescoring is deterministic end to end
    first = preds.read_bytes()
    run_ok(argv)
    assert preds.read_bytes() == first


def test_score_command_outputs_json(pipeline, tmp_path, capsys):
    ctx_json = tmp_path / "ctx.json"
    ctx_json.write_text(json.dumps({"age": 41, "temperature": 38.2,
                                    "has_fever": "yes"}))
    out = tmp_path / "score.json"
    run_ok(["score", "--cough", str(pipeline["cough"]),
            "--context", str(pipeline["context"]),
            "--wav", str(pipeline["wav"]),
            "--context-json", str(ctx_json), "--out", str(out)])
    body = json.loads(out.read_text())
    assert body == json.loads(capsys.readouterr().out)
    assert body["p_ensemble"] == pytest.approx(
        (body["p_cough"] + body["p_context"]) / 2.0)
    assert body["flag"] is None and body["symptomatic"] is True


def test_model_dir_env_var_supplies_checkpoints(pipeline, tmp_path,
                                                monkeypatch, capsys):
    model_dir = tmp_path / "models"
    model_dir.mkdir()
    shutil.copy(pipeline["cough"], model_dir / "cough.ckpt")
    shutil.copy(pipeline["context"], model_dir / "context.ckpt")
    monkeypatch.setenv("CAC_MODEL_DIR", str(model_dir))
    ctx_json = tmp_path / "ctx.json"
    ctx_json.write_text(json.dumps({"age": 30}))
    run_ok(["score", "--context-json", str(ctx_json)])
    body = json.loads(capsys.readouterr().out)
    assert body["flag"] == "context-only"
    assert set(body["model_versions"]) == {"cough", "context"}


def test_explain_saliency_writes_map_and_pgm(pipeline, tmp_path):
    out = tmp_path / "sal.cten"
    pgm = tmp_path / "sal.pgm"
    run_ok(["explain", "saliency", "--cough", str(pipeline["cough"]),
            "--wav", str(pipeline["wav"]), "--out", str(out),
            "--pgm", str(pgm)])
    smap = read_tensor(out)
    assert smap.shape == (64, 201)
    assert float(smap.min()) >= 0.0 and float(smap.max()) <= 1.0
    assert pgm.read_bytes().startswith(b"P5\n201 64\n255\n")


def test_explain_context_writes_attributions(pipeline, tmp_path, capsys):
    cohort_ids = [json.loads(line)["individual_id"]
                  for line in pipeline["manifest"].read_text().splitlines()]
    out = tmp_path / "attr"
    run_ok(["explain", "context", "--context", str(pipeline["context"]),
            "--manifest", str(pipeline["manifest"]),
            "--split", str(pipeline["split"]),
            "--ids", cohort_ids[0], "--out", str(out)])
    body = json.loads((out / f"{cohort_ids[0]}.json").read_text())
    assert "temperature" in body["weights"]
    ordered = [abs(v) for v in body["weights"].values()]
    assert ordered == sorted(ordered, reverse=True)


def test_config_file_feeds_training_defaults(pipeline, tmp_path, capsys):
    cfg = tmp_path / "train.toml"
    cfg.write_text("[train]\nmax_epochs = 3\nseed = 9\n")
    out = tmp_path / "ctx2.ckpt"
    run_ok(["train", "context", "--manifest", str(pipeline["manifest"]),
            "--split", str(pipeline["split"]), "--config", str(cfg),
            "--out", str(out)])
    ckpt = load_checkpoint(out)
    assert ckpt.meta["seed"] == 9
    assert ckpt.meta["epochs_run"] <= 3


def test_errors_exit_2_with_one_line_diagnostic(pipeline, tmp_path,
                                                capsys):
    # no checkpoints anywhere
    assert main(["score", "--context-json", "/nonexistent.json"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: ") and err.count("\n") == 1

    cfg = tmp_path / "bad.toml"
    cfg.write_text("[train]\nbogus = 1\n")
    code = main(["train", "context", "--manifest",
                 str(pipeline["manifest"]), "--split",
                 str(pipeline["split"]), "--config", str(cfg),
                 "--out", str(tmp_path / "x.ckpt")])
    assert code == 2
    assert "bogus" in capsys.readouterr().err

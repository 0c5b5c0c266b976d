"""Command-line driver for the screening pipeline.

Subcommands cover the whole flow: synth-corpus, featurize, split,
train, evaluate, explain, label-noise, score, serve. Every command
exits nonzero with a one-line diagnostic on validation failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from .audio.dsp import (Featurizer, MelConfig, StftConfig,
                        load_and_normalize)
from .audio.tensorfile import read_tensor, write_tensor
from .augment import NoiseBank
from .cohort import (Cohort, SplitAssignment, choose_test_sites,
                     encode_cohort, fit_context_encoder, ingest_manifest,
                     split_random, split_site, split_time)
from .errors import CoughScreenError
from .evaluation import evaluate, label_noise_table, write_roc_csv
from .explain import LimeConfig, lime_explain, saliency, write_pgm
from .inference import (ContextScorer, CoughScorer, predict_cohort,
                        segment_sample, write_predictions)
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .service import ScoringBundle, load_bundle, score_inputs
from .synthdata import make_audio_corpus
from .training import (CoughExample, TrainConfig, train_cough,
                       train_context)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _train_config(section: dict, args, defaults: TrainConfig
                  ) -> TrainConfig:
    """Defaults < TOML [train] < CLI flags."""
    cfg = dataclasses.asdict(defaults)
    for key, value in section.items():
        if key not in cfg:
            raise ValueError(f"unknown train config key {key!r}")
        cfg[key] = value
    for key in ("seed", "batch_size", "max_epochs", "patience",
                "learning_rate", "target_val_auc"):
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return TrainConfig(**cfg)


def _featurizer(section: dict) -> Featurizer:
    stft_keys = {f.name for f in dataclasses.fields(StftConfig)}
    mel_keys = {f.name for f in dataclasses.fields(MelConfig)}
    stft = {}
    mel = {}
    for key, value in section.items():
        if key in stft_keys:
            stft[key] = value
        elif key in mel_keys:
            mel[key] = value
        else:
            raise ValueError(f"unknown feature config key {key!r}")
    return Featurizer(StftConfig(**stft), MelConfig(**mel))


def _load_cohort(args) -> Cohort:
    return ingest_manifest(args.manifest)


def _load_split(path) -> SplitAssignment:
    with open(path, "r", encoding="utf-8") as fh:
        return SplitAssignment.from_json(fh.read())


def _examples(cohort: Cohort, assignment: SplitAssignment, set_name: str,
              root) -> list[CoughExample]:
    out = []
    wanted = set(assignment.ids_in(set_name))
    for rec in cohort.records:
        if rec.individual_id not in wanted:
            continue
        waves = []
        for rel in rec.cough_sample_paths:
            path = Path(root) / rel if root else Path(rel)
            waves.append(load_and_normalize(path).samples)
        if waves:
            out.append(CoughExample(rec.individual_id, rec.label, waves))
    return out


def _model_path(args, attr: str, filename: str):
    explicit = getattr(args, attr, None)
    if explicit:
        return explicit
    model_dir = os.environ.get("CAC_MODEL_DIR")
    if model_dir and (Path(model_dir) / filename).exists():
        return Path(model_dir) / filename
    return None


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth_corpus(args) -> int:
    manifest = make_audio_corpus(args.out, n_individuals=args.n,
                                 seed=args.seed or 0)
    print(f"wrote {manifest}")
    return 0


def cmd_featurize(args) -> int:
    cohort = _load_cohort(args)
    featurizer = _featurizer(_load_config(args.config).get("features", {}))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {}
    peak = 0.0
    for rec in cohort.records:
        for k, rel in enumerate(rec.cough_sample_paths):
            src = Path(args.root) / rel if args.root else Path(rel)
            buf = load_and_normalize(src)
            segs = np.stack(segment_sample(buf, featurizer, None))
            peak = max(peak, float(np.abs(segs).max()))
            name = f"{rec.individual_id}_{k}.cten"
            write_tensor(out_dir / name, segs.astype(np.float32))
            index[rel] = {"individual_id": rec.individual_id,
                          "label": rec.label, "file": name,
                          "segments": int(segs.shape[0])}
    meta = {"rescale": peak, "featurizer": featurizer.to_config(),
            "samples": index}
    with open(out_dir / "index.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    print(f"featurized {len(index)} samples -> {out_dir} "
          f"(rescale {peak:.4f})")
    return 0


def cmd_split(args) -> int:
    cohort = _load_cohort(args)
    seed = args.seed if args.seed is not None else 0
    if args.strategy == "random":
        ratios = tuple(float(v) for v in args.ratios.split(","))
        split = split_random(cohort, ratios, seed=seed)
    elif args.strategy == "time":
        def parse_date(s):
            return datetime.date.fromisoformat(s) if s else None
        split = split_time(cohort, parse_date(args.cutoff_val),
                           parse_date(args.cutoff_test))
    elif args.strategy == "site":
        if args.test_sites:
            sites = set(args.test_sites.split(","))
        else:
            sites = choose_test_sites(cohort, args.site_fraction)
        split = split_site(cohort, sites, seed=seed)
    else:
        raise ValueError(f"unknown strategy {args.strategy!r}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(split.to_json())
    print(f"{args.strategy} split sizes: {split.sizes()}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    cohort = _load_cohort(args)
    split = _load_split(args.split)

    if args.model in ("cough", "pretrain-cough"):
        defaults = TrainConfig(optimizer="adamw", learning_rate=1e-4,
                               max_epochs=args.epochs or 200)
        cfg = _train_config(config.get("train", {}), args, defaults)
        featurizer = _featurizer(config.get("features", {}))
        train_ex = _examples(cohort, split, "train", args.root)
        val_ex = _examples(cohort, split, "validation", args.root)
        noise = NoiseBank(args.noise_dir) if args.noise_dir else None
        init = None
        if args.init_from:
            init = load_checkpoint(args.init_from).weights
        ckpt, history = train_cough(
            cfg, train_ex, val_ex, featurizer, noise_bank=noise,
            init_weights=init, kind="cough")
        if args.model == "pretrain-cough":
            ckpt.meta["pretrain"] = True
    else:
        defaults = TrainConfig(optimizer="sgd", learning_rate=1e-2,
                               max_epochs=args.epochs or 200)
        cfg = _train_config(config.get("train", {}), args, defaults)
        train_ids = set(split.ids_in("train"))
        val_ids = set(split.ids_in("validation"))
        train_recs = [r for r in cohort.records
                      if r.individual_id in train_ids]
        val_recs = [r for r in cohort.records if r.individual_id in val_ids]
        encoder = fit_context_encoder([r.context for r in train_recs])
        x_train = encode_cohort([r.context for r in train_recs], encoder)
        y_train = np.array([r.label for r in train_recs])
        x_val = encode_cohort([r.context for r in val_recs], encoder)
        y_val = np.array([r.label for r in val_recs])
        ckpt, history = train_context(cfg, x_train, y_train, x_val, y_val,
                                      encoder.to_dict(),
                                      hidden=args.hidden)

    save_checkpoint(ckpt, args.out)
    last = history[-1]
    print(f"trained {args.model}: {len(history)} epochs, "
          f"best val AUC {ckpt.meta['val_auc']:.4f} "
          f"(epoch {ckpt.meta['epoch']}), final loss {last.loss:.4f}")
    print(f"checkpoint {ckpt.version_string} -> {args.out}")
    return 0


def _scorers(args) -> ScoringBundle:
    cough_path = _model_path(args, "cough", "cough.ckpt")
    context_path = _model_path(args, "context", "context.ckpt")
    return load_bundle(cough_path, context_path)


def cmd_evaluate(args) -> int:
    cohort = _load_cohort(args)
    split = _load_split(args.split) if args.split else None
    bundle = _scorers(args)
    predictions = predict_cohort(
        cohort, split, args.set if split else None,
        bundle.cough, bundle.context, audio_root=args.root,
        workers=args.workers)
    report = evaluate(predictions, set_name=args.set)
    print(report.render())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    if args.predictions:
        write_predictions(args.predictions, predictions)
    if args.roc_csv:
        rows = [(p.p_ensemble, p.label) for p in predictions
                if p.error is None and p.p_ensemble is not None]
        write_roc_csv(args.roc_csv, [s for s, _ in rows],
                      [l for _, l in rows])
    return 0


def cmd_explain(args) -> int:
    if args.what == "saliency":
        ckpt = load_checkpoint(_model_path(args, "cough", "cough.ckpt"))
        scorer = CoughScorer.from_checkpoint(ckpt)
        buf = load_and_normalize(args.wav)
        patch = segment_sample(buf, scorer.featurizer, scorer.rescale)[0]
        smap = saliency(scorer.model, patch, args.target_class)
        write_tensor(args.out, smap.astype(np.float32))
        if args.pgm:
            write_pgm(args.pgm, smap)
        print(f"saliency map -> {args.out} "
              f"(peak region {np.unravel_index(smap.argmax(), smap.shape)})")
        return 0

    # context attributions
    ckpt = load_checkpoint(_model_path(args, "context", "context.ckpt"))
    scorer = ContextScorer.from_checkpoint(ckpt)
    cohort = _load_cohort(args)
    split = _load_split(args.split)
    train_ids = set(split.ids_in("train"))
    train_recs = [r.context for r in cohort.records
                  if r.individual_id in train_ids]
    train_x = encode_cohort(train_recs, scorer.encoder)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = LimeConfig(seed=args.seed or 0)
    from .cohort import encode_context
    for ind_id in args.ids.split(","):
        rec = cohort.by_id.get(ind_id)
        if rec is None:
            raise ValueError(f"unknown individual {ind_id!r}")
        vec = encode_context(rec.context, scorer.encoder)
        attribution = lime_explain(scorer.model, vec, scorer.encoder,
                                   train_x, cfg)
        path = out_dir / f"{ind_id}.json"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(attribution.to_json())
        top = attribution.sorted_weights()[0]
        print(f"{ind_id}: top feature {top[0]} ({top[1]:+.4f}), "
              f"fidelity R2 {attribution.r2:.3f} -> {path}")
    return 0


def cmd_label_noise(args) -> int:
    table = label_noise_table(args.sn, args.sp, args.prevalence)
    print(table.render())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(table.to_dict(), fh, indent=2, sort_keys=True)
    return 0


def cmd_score(args) -> int:
    bundle = _scorers(args)
    audio_parts = []
    for wav in args.wav or []:
        with open(wav, "rb") as fh:
            audio_parts.append((str(wav), fh.read()))
    context_obj = None
    if args.context_json:
        with open(args.context_json, "r", encoding="utf-8") as fh:
            context_obj = json.load(fh)
    result = score_inputs(bundle, audio_parts, context_obj)
    text = json.dumps(result, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    serve(_model_path(args, "cough", "cough.ckpt"),
          _model_path(args, "context", "context.ckpt"),
          host=args.host, port=args.port, max_workers=args.workers,
          audit_log=args.audit_log)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coughscreen",
        description="screening pipeline: featurize, split, train, "
                    "evaluate, explain, score, serve")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True,
                           help="cohort manifest (JSONL)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="TOML config file")

    p = sub.add_parser("synth-corpus", help="generate the synthetic "
                                            "separable corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("featurize", help="manifest -> log-mel cache")
    common(p)
    p.add_argument("--root", default=None, help="audio file root")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("split", help="assign train/validation/test")
    common(p)
    p.add_argument("--strategy", required=True,
                   choices=["random", "time", "site"])
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--cutoff-val", default=None)
    p.add_argument("--cutoff-test", default=None)
    p.add_argument("--test-sites", default=None,
                   help="comma-separated site ids")
    p.add_argument("--site-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("model", choices=["cough", "context", "pretrain-cough"])
    common(p)
    p.add_argument("--root", default=None)
    p.add_argument("--split", required=True)
    p.add_argument("--noise-dir", default=None)
    p.add_argument("--init-from", default=None,
                   help="warm-start weights from this checkpoint")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float,
                   default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--target-val-auc", dest="target_val_auc", type=float,
                   default=None)
    p.add_argument("--hidden", type=int, default=None,
                   help="context model hidden width (default linear)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a set and report AUCs")
    common(p)
    p.add_argument("--root", default=None)
    p.add_argument("--split", default=None)
    p.add_argument("--set", default="test",
                   choices=["train", "validation", "test"])
    p.add_argument("--cough", default=None)
    p.add_argument("--context", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--predictions", default=None,
                   help="per-individual JSONL path")
    p.add_argument("--roc-csv", default=None,
                   help="ensemble ROC points CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="saliency maps / attributions")
    p.add_argument("what", choices=["saliency", "context"])
    p.add_argument("--manifest", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--cough", default=None)
    p.add_argument("--context", default=None)
    p.add_argument("--wav", default=None, help="clip for saliency")
    p.add_argument("--target-class", dest="target_class", type=int,
                   default=1)
    p.add_argument("--pgm", default=None, help="also render a PGM image")
    p.add_argument("--split", default=None)
    p.add_argument("--ids", default=None,
                   help="comma-separated individual ids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("label-noise",
                       help="posterior flip/retain table for an "
                            "imperfect reference test")
    p.add_argument("--sn", type=float, required=True, help="sensitivity")
    p.add_argument("--sp", type=float, required=True, help="specificity")
    p.add_argument("--prevalence", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_label_noise)

    p = sub.add_parser("score", help="score one individual's inputs")
    p.add_argument("--cough", default=None)
    p.add_argument("--context", default=None)
    p.add_argument("--wav", action="append", default=None,
                   help="repeatable, up to 3 clips")
    p.add_argument("--context-json", default=None,
                   help="JSON file with the context block")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("serve", help="run the HTTP scoring service")
    p.add_argument("--cough", default=None)
    p.add_argument("--context", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--workers", type=int, default=2)
    p.add_argument("--audit-log", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CoughScreenError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

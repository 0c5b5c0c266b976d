"""Synthetic fixtures: a separable audio corpus where positive clips
carry band-limited bursts over noise, a separable context table, and a
cohort with deliberate site-level and time-level distribution shifts.

These stand in for the unpublished clinical dataset so that the whole
pipeline can be exercised and the learning dynamics can be asserted
against known ground truth.
"""

from __future__ import annotations

import datetime
import json
from pathlib import Path

import numpy as np

from .audio.wavio import write_wav
from .cohort import Cohort, ContextRecord, IndividualRecord, write_manifest

RATE = 16000
BURST_BAND_HZ = (600.0, 2400.0)
BURST_DUR_S = (0.3, 0.8)


def _noise(n: int, rng: np.random.Generator, kind: str = "white"
           ) -> np.ndarray:
    w = rng.standard_normal(n)
    if kind == "pink":
        # crude 1/f shaping: cumulative sum, detrended and re-whitened a bit
        p = np.cumsum(w)
        p -= np.linspace(p[0], p[-1], n)
        w = 0.7 * p / (np.abs(p).max() + 1e-9) * 3.0 + 0.3 * w
    elif kind == "hum":
        t = np.arange(n) / RATE
        w = 0.4 * w + np.sin(2 * np.pi * 50 * t) + \
            0.5 * np.sin(2 * np.pi * 150 * t)
    rms = np.sqrt(np.mean(w ** 2)) + 1e-9
    return w / rms


def _burst(dur_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Band-limited burst: a handful of random tones under a raised-
    cosine envelope."""
    t = np.arange(dur_samples) / RATE
    out = np.zeros(dur_samples)
    for _ in range(6):
        f = rng.uniform(*BURST_BAND_HZ)
        out += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    env = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(dur_samples)
                             / dur_samples)
    out = out * env
    return out / (np.abs(out).max() + 1e-9)


def synth_clip(label: int, dur_s: float, rng: np.random.Generator
               ) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """Noise-floor clip; positives get 1-3 bursts, the first of which
    always sits fully inside the first 2 seconds."""
    n = int(round(dur_s * RATE))
    x = 0.05 * _noise(n, rng)
    events = []
    if label == 1:
        n_bursts = int(rng.integers(1, 4))
        for b in range(n_bursts):
            dur = rng.uniform(*BURST_DUR_S)
            dn = int(round(dur * RATE))
            if b == 0:
                start_s = rng.uniform(0.05, 2.0 - dur - 0.05)
            else:
                start_s = rng.uniform(0.0, dur_s - dur)
            s = int(round(start_s * RATE))
            amp = rng.uniform(0.35, 0.6)
            x[s:s + dn] += amp * _burst(dn, rng)
            events.append((s / RATE, (s + dn) / RATE))
    peak = np.abs(x).max()
    if peak > 0.99:
        x = 0.99 * x / peak
    return x, events


def make_context_record(label: int, rng: np.random.Generator,
                        missing_rate: float = 0.03) -> ContextRecord:
    """Separable context: temperature and fever dominate, the other
    fields carry weak or no signal. A few values go missing to
    exercise imputation."""
    pos = label == 1

    def miss(v):
        return None if rng.random() < missing_rate else v

    temperature = rng.normal(38.6, 0.35) if pos else rng.normal(36.7, 0.25)
    has_fever = rng.random() < (0.9 if pos else 0.05)
    has_cough = rng.random() < (0.75 if pos else 0.45)
    has_sob = rng.random() < (0.3 if pos else 0.1)
    days_cough = max(0.0, rng.normal(6, 2) if pos else rng.normal(2, 1.5)) \
        if has_cough else 0.0
    return ContextRecord(
        age=miss(float(np.clip(round(rng.normal(46, 14)), 18, 90))),
        temperature=miss(round(temperature, 1)),
        days_cough=miss(round(days_cough, 1)),
        days_sob=round(max(0.0, rng.normal(2, 1)), 1) if has_sob else 0.0,
        days_fever=round(max(0.0, rng.normal(3, 1)), 1) if has_fever
        else 0.0,
        has_cough=miss(has_cough),
        has_sob=has_sob,
        has_fever=has_fever,
        contact_confirmed=rng.random() < (0.5 if pos else 0.15),
        is_health_worker=rng.random() < 0.2,
        travel_history=str(rng.choice(
            ["No", "No", "No", "InterDistrict", "InterState",
             "InterCountry"])),
    )


def make_audio_corpus(out_dir, n_individuals: int = 200, seed: int = 0,
                      sites: tuple[str, ...] = ("site-a", "site-b",
                                                "site-c", "site-d"),
                      max_samples: int = 2) -> Path:
    """Bundled end-to-end fixture on disk.

    Layout: audio/<id>_<k>.wav clips, noise/*.wav background files,
    manifest.jsonl, events.json (per-clip burst intervals in seconds).
    Returns the manifest path. Labels alternate for an exact 50/50
    balance.
    """
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    (out / "noise").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)

    for kind in ("white", "pink", "hum"):
        write_wav(out / "noise" / f"{kind}.wav",
                  0.08 * _noise(5 * RATE, rng, kind), RATE)

    base_date = datetime.date(2020, 4, 1)
    records = []
    events: dict[str, list] = {}
    for i in range(n_individuals):
        label = i % 2
        ind_id = f"ind-{i:04d}"
        n_samples = int(rng.integers(1, max_samples + 1))
        paths = []
        for k in range(n_samples):
            dur = rng.uniform(2.2, 4.0)
            x, ev = synth_clip(label, dur, rng)
            rel = f"audio/{ind_id}_{k}.wav"
            write_wav(out / rel, x, RATE)
            paths.append(rel)
            events[rel] = [list(e) for e in ev]
        records.append(IndividualRecord(
            individual_id=ind_id,
            cough_sample_paths=tuple(paths),
            context=make_context_record(label, rng),
            label=label,
            site_id=str(rng.choice(list(sites))),
            enrollment_date=base_date + datetime.timedelta(
                days=int(rng.integers(0, 210))),
        ))
    write_manifest(out / "manifest.jsonl", Cohort(records))
    with open(out / "events.json", "w", encoding="utf-8") as fh:
        json.dump(events, fh, indent=1, sort_keys=True)
    return out / "manifest.jsonl"


def make_context_cohort(n: int = 400, seed: int = 0) -> Cohort:
    """In-memory cohort with separable context and no audio, for
    context-model training tests."""
    rng = np.random.default_rng(seed)
    base_date = datetime.date(2020, 4, 1)
    records = []
    for i in range(n):
        label = i % 2
        records.append(IndividualRecord(
            individual_id=f"ctx-{i:04d}",
            cough_sample_paths=(),
            context=make_context_record(label, rng),
            label=label,
            site_id=f"site-{int(rng.integers(0, 4))}",
            enrollment_date=base_date + datetime.timedelta(
                days=int(rng.integers(0, 210))),
        ))
    return Cohort(records)


SHIFT_SITES = {"site-big": 70, "site-p": 50, "site-q": 40,
               "site-r": 30, "site-s": 30, "site-t": 20}
SHIFT_FLIP_DATE = datetime.date(2020, 10, 15)


def make_shifted_cohort(seed: int = 0) -> Cohort:
    """Cohort whose nuisance features reverse direction in the held-out
    regimes.

    temperature tracks the label everywhere (the stable signal). age
    tracks the label inside the smaller sites but reverses inside
    'site-big', the site a largest-first holdout picks. days_cough
    tracks the label before mid-October 2020 and reverses after, the
    tail a time split holds out. A model leaning on the nuisances
    transfers worst to the site and time test sets.
    """
    rng = np.random.default_rng(seed)
    start = datetime.date(2020, 4, 1)
    span = (datetime.date(2020, 11, 30) - start).days
    site_pool = [s for s, c in SHIFT_SITES.items() for _ in range(c)]
    rng.shuffle(site_pool)
    records = []
    for i, site in enumerate(site_pool):
        label = i % 2
        sgn = 2 * label - 1
        date = start + datetime.timedelta(days=int(rng.integers(0, span + 1)))
        site_dir = -1.0 if site == "site-big" else 1.0
        time_dir = -1.0 if date >= SHIFT_FLIP_DATE else 1.0
        temperature = 37.2 + 0.45 * sgn + rng.normal(0, 0.5)
        age = float(np.clip(round(50 + 10 * sgn * site_dir
                                  + rng.normal(0, 6)), 18, 90))
        days_cough = max(0.0, 4 + 2.5 * sgn * time_dir + rng.normal(0, 1.5))
        ctx = ContextRecord(
            age=age,
            temperature=round(temperature, 2),
            days_cough=round(days_cough, 1),
            days_sob=round(float(rng.uniform(0, 3)), 1),
            days_fever=round(float(rng.uniform(0, 3)), 1),
            has_cough=bool(rng.random() < 0.5),
            has_sob=bool(rng.random() < 0.2),
            has_fever=bool(rng.random() < 0.3),
            contact_confirmed=bool(rng.random() < 0.25),
            is_health_worker=bool(rng.random() < 0.2),
            travel_history=str(rng.choice(["No", "InterDistrict",
                                           "InterState"])),
        )
        records.append(IndividualRecord(
            individual_id=f"shift-{i:04d}",
            cough_sample_paths=(),
            context=ctx,
            label=label,
            site_id=site,
            enrollment_date=date,
        ))
    return Cohort(records)

"""Cohort data model, manifest ingest, leakage-free splits, and context
feature encoding.

Individuals are the unit of splitting: every sample of an individual
lands in the same set. The manifest is JSONL, one individual per line.
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError, SplitError

CONTINUOUS_FEATURES = ("age", "temperature", "days_cough", "days_sob",
                       "days_fever")
CATEGORICAL_FEATURES = ("has_cough", "has_sob", "has_fever",
                        "contact_confirmed", "is_health_worker",
                        "travel_history")

TRAVEL_VALUES = ("No", "InterDistrict", "InterState", "InterCountry")
_TRAVEL_NORMALIZED = {re.sub(r"[^a-z]", "", v.lower()): v
                      for v in TRAVEL_VALUES}

SETS = ("train", "validation", "test")
MISSING = "missing"  # categorical placeholder for absent values


@dataclass(frozen=True)
class ContextRecord:
    age: float | None = None
    temperature: float | None = None
    days_cough: float | None = None
    days_sob: float | None = None
    days_fever: float | None = None
    has_cough: bool | None = None
    has_sob: bool | None = None
    has_fever: bool | None = None
    contact_confirmed: bool | None = None
    is_health_worker: bool | None = None
    travel_history: str | None = None


@dataclass(frozen=True)
class IndividualRecord:
    individual_id: str
    cough_sample_paths: tuple[str, ...]
    context: ContextRecord
    label: int  # 1 = lab positive, 0 = negative
    site_id: str
    enrollment_date: datetime.date


class Cohort:
    """Validated list of individuals with unique ids."""

    def __init__(self, records: list[IndividualRecord]):
        seen = set()
        for r in records:
            if r.individual_id in seen:
                raise ManifestError(f"duplicate individual_id "
                                    f"{r.individual_id!r}")
            seen.add(r.individual_id)
        self.records = list(records)
        self.by_id = {r.individual_id: r for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def sites(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.site_id] = counts.get(r.site_id, 0) + 1
        return counts


@dataclass
class SplitAssignment:
    strategy: str
    params: dict
    assignment: dict[str, str]  # individual_id -> train/validation/test

    def ids_in(self, set_name: str) -> list[str]:
        return [i for i, s in self.assignment.items() if s == set_name]

    def sizes(self) -> dict[str, int]:
        return {s: len(self.ids_in(s)) for s in SETS}

    def to_json(self) -> str:
        return json.dumps({"strategy": self.strategy, "params": self.params,
                           "assignment": self.assignment},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        obj = json.loads(text)
        return cls(obj["strategy"], obj["params"], obj["assignment"])


# ---------------------------------------------------------------------------
# Manifest parsing

def _parse_yes_no(value, line: int, key: str) -> bool | None:
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("yes", "y", "true", "1"):
            return True
        if v in ("no", "n", "false", "0"):
            return False
        if v == "":
            return None
    raise ManifestError(f"line {line}: {key} has unknown value {value!r}")


def normalize_travel(value) -> str | None:
    """Map case/hyphen/space variants onto the canonical travel values."""
    if value is None:
        return None
    key = re.sub(r"[^a-z]", "", str(value).lower())
    if key == "":
        return None
    if key not in _TRAVEL_NORMALIZED:
        raise ValueError(f"unknown travel_history value {value!r}")
    return _TRAVEL_NORMALIZED[key]


def _parse_continuous(value, line: int, key: str) -> float | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestError(f"line {line}: {key} must be numeric, "
                            f"got {value!r}")
    v = float(value)
    if not np.isfinite(v) or v < 0:
        raise ManifestError(f"line {line}: {key} must be non-negative "
                            f"and finite, got {value!r}")
    return v


def _parse_context(obj: dict, line: int) -> ContextRecord:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {line}: context must be an object")
    kwargs = {}
    for key in CONTINUOUS_FEATURES:
        kwargs[key] = _parse_continuous(obj.get(key), line, key)
    for key in ("has_cough", "has_sob", "has_fever", "contact_confirmed",
                "is_health_worker"):
        kwargs[key] = _parse_yes_no(obj.get(key), line, key)
    try:
        kwargs["travel_history"] = normalize_travel(obj.get("travel_history"))
    except ValueError as exc:
        raise ManifestError(f"line {line}: {exc}") from exc
    return ContextRecord(**kwargs)


def parse_context_obj(obj: dict) -> ContextRecord:
    """Context block parser for non-manifest payloads (service
    uploads); raises ManifestError with field-level messages."""
    try:
        return _parse_context(obj, line=0)
    except ManifestError as exc:
        raise ManifestError(str(exc).replace("line 0: ", "")) from exc


def parse_manifest_line(raw: str, line: int) -> IndividualRecord:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"line {line}: malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ManifestError(f"line {line}: expected a JSON object")

    ind_id = obj.get("individual_id")
    if not isinstance(ind_id, str) or not ind_id:
        raise ManifestError(f"line {line}: missing individual_id")

    samples = obj.get("samples")
    if (not isinstance(samples, list) or not samples
            or not all(isinstance(s, str) and s for s in samples)):
        raise ManifestError(f"line {line}: samples must be a non-empty "
                            f"list of paths")
    if len(samples) > 3:
        raise ManifestError(f"line {line}: at most 3 samples per individual")

    label_raw = obj.get("label")
    if not isinstance(label_raw, str) \
            or label_raw.lower() not in ("positive", "negative"):
        raise ManifestError(f"line {line}: label must be "
                            f"'positive' or 'negative'")
    label = 1 if label_raw.lower() == "positive" else 0

    site = obj.get("site_id")
    if not isinstance(site, str) or not site:
        raise ManifestError(f"line {line}: missing site_id")

    try:
        date = datetime.date.fromisoformat(str(obj.get("date")))
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"line {line}: bad date "
                            f"{obj.get('date')!r}") from exc

    context = _parse_context(obj.get("context", {}), line)
    return IndividualRecord(ind_id, tuple(samples), context, label, site,
                            date)


def ingest_manifest(path) -> Cohort:
    """Parse a JSONL manifest; the first invalid row aborts with its line
    number in the error message."""
    records = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rec = parse_manifest_line(raw, line_no)
            if rec.individual_id in seen:
                raise ManifestError(
                    f"line {line_no}: duplicate individual_id "
                    f"{rec.individual_id!r} (first on line "
                    f"{seen[rec.individual_id]})")
            seen[rec.individual_id] = line_no
            records.append(rec)
    return Cohort(records)


def record_to_manifest_obj(rec: IndividualRecord) -> dict:
    """Inverse of parse_manifest_line, for writing manifests."""
    ctx = rec.context

    def yn(v):
        return None if v is None else ("yes" if v else "no")

    return {
        "individual_id": rec.individual_id,
        "samples": list(rec.cough_sample_paths),
        "label": "positive" if rec.label == 1 else "negative",
        "site_id": rec.site_id,
        "date": rec.enrollment_date.isoformat(),
        "context": {
            "age": ctx.age,
            "temperature": ctx.temperature,
            "days_cough": ctx.days_cough,
            "days_sob": ctx.days_sob,
            "days_fever": ctx.days_fever,
            "has_cough": yn(ctx.has_cough),
            "has_sob": yn(ctx.has_sob),
            "has_fever": yn(ctx.has_fever),
            "contact_confirmed": yn(ctx.contact_confirmed),
            "is_health_worker": yn(ctx.is_health_worker),
            "travel_history": ctx.travel_history,
        },
    }


def write_manifest(path, cohort: Cohort) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in cohort.records:
            fh.write(json.dumps(record_to_manifest_obj(rec), sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Splits

def _largest_remainder(n: int, ratios: tuple[float, ...]) -> list[int]:
    exact = [n * r for r in ratios]
    floors = [int(np.floor(e)) for e in exact]
    short = n - sum(floors)
    # Hand out the shortfall by descending fractional remainder; ties go
    # to the earlier set, keeping the result deterministic.
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def split_random(cohort: Cohort, ratios=(0.8, 0.1, 0.1),
                 seed: int = 0) -> SplitAssignment:
    """Seeded shuffle of individuals partitioned by largest-remainder
    rounding of the ratios."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be 3 values summing to 1, "
                         f"got {ratios}")
    if len(cohort) < 3:
        raise SplitError("cohort too small to split three ways")
    ids = [r.individual_id for r in cohort.records]
    rng = np.random.default_rng(seed)
    rng.shuffle(ids)
    sizes = _largest_remainder(len(ids), tuple(ratios))
    assignment = {}
    start = 0
    for set_name, size in zip(SETS, sizes):
        for i in ids[start:start + size]:
            assignment[i] = set_name
        start += size
    return SplitAssignment("random",
                           {"ratios": list(ratios), "seed": seed},
                           assignment)


def _pick_cutoff(sorted_dates: list[datetime.date], tail_target: int
                 ) -> datetime.date:
    # Candidate cutoffs are the distinct dates; choose the one whose
    # >=cutoff tail is closest to the target size.
    n = len(sorted_dates)
    best, best_err = None, None
    for c in sorted(set(sorted_dates)):
        tail = n - np.searchsorted(sorted_dates, c, side="left")
        err = abs(int(tail) - tail_target)
        if best_err is None or err < best_err:
            best, best_err = c, err
    return best


def split_time(cohort: Cohort, cutoff_val: datetime.date | None = None,
               cutoff_test: datetime.date | None = None,
               val_fraction: float = 0.1,
               test_fraction: float = 0.1) -> SplitAssignment:
    """Half-open date intervals: train < cutoff_val <= validation <
    cutoff_test <= test.

    Without explicit cutoffs, dates closest to the requested tail sizes
    are chosen (ties on a date inflate the later set).
    """
    dates = sorted(r.enrollment_date for r in cohort.records)
    n = len(dates)
    if cutoff_test is None:
        cutoff_test = _pick_cutoff(dates, max(1, round(test_fraction * n)))
    if cutoff_val is None:
        dev_dates = [d for d in dates if d < cutoff_test]
        if not dev_dates:
            raise SplitError("test cutoff leaves no development data")
        cutoff_val = _pick_cutoff(dev_dates, max(1, round(val_fraction * n)))
    if cutoff_val >= cutoff_test:
        raise SplitError(f"cutoff_val {cutoff_val} must precede "
                         f"cutoff_test {cutoff_test}")

    assignment = {}
    for r in cohort.records:
        if r.enrollment_date < cutoff_val:
            assignment[r.individual_id] = "train"
        elif r.enrollment_date < cutoff_test:
            assignment[r.individual_id] = "validation"
        else:
            assignment[r.individual_id] = "test"
    split = SplitAssignment("time",
                            {"cutoff_val": cutoff_val.isoformat(),
                             "cutoff_test": cutoff_test.isoformat()},
                            assignment)
    for set_name, size in split.sizes().items():
        if size == 0:
            raise SplitError(f"time split leaves {set_name} empty")
    return split


def split_site(cohort: Cohort, test_sites: set[str],
               val_fraction: float = 0.1, seed: int = 0) -> SplitAssignment:
    """Held-out collection sites form the test set; the rest is split
    randomly into train/validation (val_fraction of the remainder)."""
    if not test_sites:
        raise SplitError("test_sites must be non-empty")
    known = set(cohort.sites())
    unknown = set(test_sites) - known
    if unknown:
        raise SplitError(f"unknown sites: {sorted(unknown)}")

    test_ids = [r.individual_id for r in cohort.records
                if r.site_id in test_sites]
    rest = [r.individual_id for r in cohort.records
            if r.site_id not in test_sites]
    if not rest:
        raise SplitError("test sites cover the whole cohort")

    rng = np.random.default_rng(seed)
    rng.shuffle(rest)
    n_val = 0
    if len(rest) >= 2:
        n_val = min(max(1, round(val_fraction * len(rest))), len(rest) - 1)
    assignment = {i: "test" for i in test_ids}
    for i in rest[:n_val]:
        assignment[i] = "validation"
    for i in rest[n_val:]:
        assignment[i] = "train"
    return SplitAssignment("site",
                           {"test_sites": sorted(test_sites),
                            "val_fraction": val_fraction, "seed": seed},
                           assignment)


def choose_test_sites(cohort: Cohort, target_fraction: float = 0.2
                      ) -> set[str]:
    """Greedy helper: largest sites first until the held-out share
    reaches the target."""
    counts = cohort.sites()
    if len(counts) < 2:
        raise SplitError("need at least 2 sites to hold one out")
    picked: set[str] = set()
    total = 0
    target = target_fraction * len(cohort)
    for site, cnt in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if total >= target:
            break
        if len(picked) == len(counts) - 1:
            break  # never swallow every site
        picked.add(site)
        total += cnt
    return picked


# ---------------------------------------------------------------------------
# Context encoding

@dataclass
class EncoderState:
    """Train-set statistics turning a ContextRecord into x_context."""

    cont_stats: dict[str, tuple[float, float]]   # name -> (mean, std)
    dropped: dict[str, str]                      # name -> reason
    cat_tables: dict[str, dict[str, int]]        # name -> value -> code
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.feature_names:
            self.feature_names = (
                [f for f in CONTINUOUS_FEATURES if f in self.cont_stats]
                + list(CATEGORICAL_FEATURES))

    @property
    def dim(self) -> int:
        return len(self.feature_names)

    def unknown_code(self, feature: str) -> int:
        return len(self.cat_tables[feature])

    def to_dict(self) -> dict:
        return {"cont_stats": {k: list(v) for k, v in self.cont_stats.items()},
                "dropped": self.dropped,
                "cat_tables": self.cat_tables,
                "feature_names": self.feature_names}

    @classmethod
    def from_dict(cls, obj: dict) -> "EncoderState":
        return cls(
            cont_stats={k: (float(v[0]), float(v[1]))
                        for k, v in obj["cont_stats"].items()},
            dropped=dict(obj["dropped"]),
            cat_tables={k: {vk: int(vv) for vk, vv in tbl.items()}
                        for k, tbl in obj["cat_tables"].items()},
            feature_names=list(obj["feature_names"]),
        )


def _categorical_value(record: ContextRecord, feature: str) -> str:
    value = getattr(record, feature)
    if value is None:
        return MISSING
    if feature == "travel_history":
        return value
    return "yes" if value else "no"


def fit_context_encoder(train: list[ContextRecord]) -> EncoderState:
    """Label tables and standardization statistics from train records only.

    Continuous features with no observed values or zero variance are
    dropped and recorded. Missing continuous values impute to the train
    mean; categorical missing is its own category.
    """
    if not train:
        raise ValueError("cannot fit an encoder on an empty train set")

    cont_stats: dict[str, tuple[float, float]] = {}
    dropped: dict[str, str] = {}
    for feat in CONTINUOUS_FEATURES:
        values = [getattr(r, feat) for r in train
                  if getattr(r, feat) is not None]
        if not values:
            dropped[feat] = "no observed values in train"
            continue
        arr = np.asarray(values, dtype=np.float64)
        mean = float(arr.mean())
        std = float(arr.std())  # population formula
        if std == 0.0:
            dropped[feat] = "zero variance in train"
            continue
        cont_stats[feat] = (mean, std)

    cat_tables: dict[str, dict[str, int]] = {}
    for feat in CATEGORICAL_FEATURES:
        values = sorted({_categorical_value(r, feat) for r in train})
        cat_tables[feat] = {v: i for i, v in enumerate(values)}

    return EncoderState(cont_stats, dropped, cat_tables)


def encode_context(record: ContextRecord, enc: EncoderState) -> np.ndarray:
    """Deterministic feature vector: standardized continuous entries
    followed by categorical label codes (unknowns get the reserved
    code)."""
    out = np.empty(enc.dim, dtype=np.float64)
    i = 0
    for feat in CONTINUOUS_FEATURES:
        if feat not in enc.cont_stats:
            continue
        mean, std = enc.cont_stats[feat]
        value = getattr(record, feat)
        if value is None:
            value = mean  # imputation: encodes to exactly 0
        out[i] = (value - mean) / std
        i += 1
    for feat in CATEGORICAL_FEATURES:
        value = _categorical_value(record, feat)
        table = enc.cat_tables[feat]
        out[i] = table.get(value, enc.unknown_code(feat))
        i += 1
    return out


def encode_cohort(records: list[ContextRecord], enc: EncoderState
                  ) -> np.ndarray:
    return np.stack([encode_context(r, enc) for r in records])


def is_symptomatic(record: ContextRecord) -> bool:
    """At least one of cough, fever, or shortness of breath reported;
    missing flags count as 'no'."""
    return bool(record.has_cough) or bool(record.has_fever) \
        or bool(record.has_sob)

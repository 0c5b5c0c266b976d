"""ROC-AUC scoring, per-population report tables, and the Bayes
label-noise calculator for an imperfect reference test."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError

MODELS = ("cough", "context", "ensemble")
POPULATIONS = ("all", "symptomatic", "asymptomatic")


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative,
    ties counted half. Computed via midranks, which matches the
    brute-force pairwise count exactly."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise MetricError("scores and labels must be equal-length 1-d")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"AUC undefined: {n_pos} positives, "
                          f"{n_neg} negatives")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        # midrank for the tie block [i, j], 1-based
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    r_pos = float(np.sum(ranks[y == 1]))
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) rows swept over unique scores, for
    external plotting."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC undefined for single-class input")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    pts = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    for i in range(len(s)):
        if y_sorted[i] == 1:
            tp += 1
        else:
            fp += 1
        last = i + 1 == len(s)
        if last or s_sorted[i + 1] != s_sorted[i]:
            pts.append((fp / n_neg, tp / n_pos, float(s_sorted[i])))
    return pts


def write_roc_csv(path, scores, labels):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold\n")
        for fpr, tpr, thr in roc_points(scores, labels):
            fh.write(f"{fpr!r},{tpr!r},{thr!r}\n")


# ---------------------------------------------------------------------------
# Report

@dataclass
class EvaluationReport:
    """AUC for each model over each population slice.

    cells[model][population] is a float AUC or None when the slice
    holds a single class (rendered "n/a").
    """

    cells: dict
    sizes: dict            # population -> (n, n_pos)
    excluded: int = 0
    set_name: str | None = None

    def to_json(self) -> str:
        return json.dumps({"cells": self.cells, "sizes": self.sizes,
                           "excluded": self.excluded,
                           "set": self.set_name},
                          indent=2, sort_keys=True)

    def render(self) -> str:
        """Aligned text table: models as rows, all/S/A as columns."""
        def fmt(v):
            return "n/a" if v is None else f"{v:.3f}"

        head = ["model"] + [f"{p} (n={self.sizes[p][0]}, "
                            f"pos={self.sizes[p][1]})"
                            for p in POPULATIONS]
        rows = [[m] + [fmt(self.cells[m][p]) for p in POPULATIONS]
                for m in MODELS]
        widths = [max(len(head[c]), *(len(r[c]) for r in rows))
                  for c in range(len(head))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
        lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        if self.excluded:
            lines.append(f"excluded (unreadable audio): {self.excluded}")
        return "\n".join(lines)


def _subset_auc(scores, labels) -> float | None:
    try:
        return roc_auc(scores, labels)
    except MetricError:
        return None


def evaluate(predictions, set_name: str | None = None) -> EvaluationReport:
    """Report over a list of IndividualPrediction.

    Individuals with an error status are excluded and counted. A cell
    whose slice has one class comes back None, never a coerced number.
    """
    usable = [p for p in predictions if p.error is None]
    excluded = len(predictions) - len(usable)
    if not usable:
        raise MetricError("no scorable predictions")
    for p in usable:
        if p.label is None:
            raise MetricError(f"prediction {p.individual_id} has no label")

    def rows(pop):
        if pop == "all":
            return usable
        want = pop == "symptomatic"
        return [p for p in usable if bool(p.symptomatic) == want]

    cells = {m: {} for m in MODELS}
    sizes = {}
    for pop in POPULATIONS:
        sub = rows(pop)
        sizes[pop] = (len(sub), sum(1 for p in sub if p.label == 1))
        for model in MODELS:
            attr = f"p_{model}"
            pairs = [(getattr(p, attr), p.label) for p in sub
                     if getattr(p, attr) is not None]
            if not pairs:
                cells[model][pop] = None
                continue
            s = [v for v, _ in pairs]
            y = [l for _, l in pairs]
            cells[model][pop] = _subset_auc(s, y)
    return EvaluationReport(cells, sizes, excluded, set_name)


# ---------------------------------------------------------------------------
# Label noise under an imperfect reference test

@dataclass(frozen=True)
class NoiseTable:
    sensitivity: float
    specificity: float
    prevalence: float
    p_observed_neg: float     # P(R=0)
    p_flip_neg: float         # P(C=1 | R=0): observed 0 is wrong
    p_flip_pos: float         # P(C=0 | R=1): observed 1 is wrong
    p_retain_neg: float       # P(C=0 | R=0)
    p_retain_pos: float       # P(C=1 | R=1)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def render(self) -> str:
        return "\n".join([
            f"sensitivity       {self.sensitivity:.4f}",
            f"specificity       {self.specificity:.4f}",
            f"prevalence        {self.prevalence:.4f}",
            f"P(R=0)            {self.p_observed_neg:.4f}",
            f"p_flip(label=0)   {self.p_flip_neg:.4f}",
            f"p_flip(label=1)   {self.p_flip_pos:.4f}",
            f"p_retain(label=0) {self.p_retain_neg:.4f}",
            f"p_retain(label=1) {self.p_retain_pos:.4f}",
        ])


def label_noise_table(sensitivity: float, specificity: float,
                      prevalence: float) -> NoiseTable:
    """Posterior flip/retain probabilities for labels produced by a
    test with the given sensitivity and specificity, via Bayes' rule.

    R is the recorded label, C the true condition:
      P(R=0) = Sp(1-prev) + (1-Sn)prev
      p_flip(0) = P(C=1|R=0), p_flip(1) = P(C=0|R=1)
    """
    for name, v in (("sensitivity", sensitivity),
                    ("specificity", specificity),
                    ("prevalence", prevalence)):
        if not (0.0 < v < 1.0):
            raise MetricError(f"{name} must lie in (0,1), got {v}")
    sn, sp, prev = sensitivity, specificity, prevalence
    p_r0 = sp * (1.0 - prev) + (1.0 - sn) * prev
    p_r1 = 1.0 - p_r0
    if p_r0 <= 0.0 or p_r1 <= 0.0:
        raise MetricError("degenerate inputs: an observed label has "
                          "zero probability")
    p_flip_neg = (1.0 - sn) * prev / p_r0
    p_flip_pos = (1.0 - sp) * (1.0 - prev) / p_r1
    return NoiseTable(sn, sp, prev, p_r0, p_flip_neg, p_flip_pos,
                      1.0 - p_flip_neg, 1.0 - p_flip_pos)

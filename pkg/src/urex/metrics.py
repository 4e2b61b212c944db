"""Clustering agreement metrics computed from one contingency-table pass.

B-cubed averages per-item precision/recall of cluster-vs-class overlap and
takes the harmonic mean of the two averages. V-measure is the harmonic mean
of homogeneity and completeness from natural-log conditional entropies. ARI
is the chance-corrected pair-counting index. All three are invariant under
relabeling either side.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Corpus


class EvaluationError(ValueError):
    """Invalid metric inputs (length mismatch, nothing to evaluate)."""


@dataclass(frozen=True)
class PrecisionRecallF1:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class HomogeneityCompletenessV:
    homogeneity: float
    completeness: float
    v: float


@dataclass(frozen=True)
class ClusteringReport:
    """All metrics for one (predicted, gold) pair over the labelled instances."""

    b3: PrecisionRecallF1
    v: HomogeneityCompletenessV
    ari: float
    n_evaluated: int

    def to_percent_dict(self) -> dict:
        return {
            "b3": {
                "precision": 100.0 * self.b3.precision,
                "recall": 100.0 * self.b3.recall,
                "f1": 100.0 * self.b3.f1,
            },
            "v": {
                "homogeneity": 100.0 * self.v.homogeneity,
                "completeness": 100.0 * self.v.completeness,
                "v": 100.0 * self.v.v,
            },
            "ari": 100.0 * self.ari,
            "n_evaluated": self.n_evaluated,
        }

    def summary(self) -> str:
        return (
            f"B3 P/R/F1 = {100 * self.b3.precision:.1f}/{100 * self.b3.recall:.1f}/"
            f"{100 * self.b3.f1:.1f} | "
            f"V hom/comp/V = {100 * self.v.homogeneity:.1f}/"
            f"{100 * self.v.completeness:.1f}/{100 * self.v.v:.1f} | "
            f"ARI = {100 * self.ari:.1f} (n={self.n_evaluated})"
        )


def _check_inputs(pred, gold):
    if len(pred) != len(gold):
        raise EvaluationError(
            f"length mismatch: predicted has {len(pred)} labels, gold has {len(gold)}"
        )
    if len(pred) == 0:
        raise EvaluationError("empty evaluation set")


def _contingency(pred, gold):
    cells = Counter(zip(pred, gold))
    pred_sizes = Counter(pred)
    gold_sizes = Counter(gold)
    return cells, pred_sizes, gold_sizes, len(pred)


def b_cubed(pred, gold) -> PrecisionRecallF1:
    """Per-item precision/recall averages; F1 is their harmonic mean."""
    _check_inputs(pred, gold)
    cells, pred_sizes, gold_sizes, n = _contingency(pred, gold)
    precision = sum(c * c / pred_sizes[p] for (p, g), c in cells.items()) / n
    recall = sum(c * c / gold_sizes[g] for (p, g), c in cells.items()) / n
    f1 = 2.0 * precision * recall / (precision + recall)
    return PrecisionRecallF1(precision, recall, f1)


def _entropy_from_sizes(sizes, n: int) -> float:
    return -sum(c / n * math.log(c / n) for c in sizes.values() if c)


def v_measure(pred, gold) -> HomogeneityCompletenessV:
    """Homogeneity, completeness, and their harmonic mean (natural log)."""
    _check_inputs(pred, gold)
    cells, pred_sizes, gold_sizes, n = _contingency(pred, gold)
    h_gold = _entropy_from_sizes(gold_sizes, n)
    h_pred = _entropy_from_sizes(pred_sizes, n)
    h_gold_given_pred = -sum(
        c / n * math.log(c / pred_sizes[p]) for (p, g), c in cells.items()
    )
    h_pred_given_gold = -sum(
        c / n * math.log(c / gold_sizes[g]) for (p, g), c in cells.items()
    )
    homogeneity = 1.0 if h_gold == 0.0 else 1.0 - h_gold_given_pred / h_gold
    completeness = 1.0 if h_pred == 0.0 else 1.0 - h_pred_given_gold / h_pred
    denom = homogeneity + completeness
    v = 0.0 if denom == 0.0 else 2.0 * homogeneity * completeness / denom
    return HomogeneityCompletenessV(homogeneity, completeness, v)


def _comb2(n: int) -> int:
    return n * (n - 1) // 2


def ari(pred, gold) -> float:
    """Adjusted Rand index over pair counts from the contingency table."""
    _check_inputs(pred, gold)
    cells, pred_sizes, gold_sizes, n = _contingency(pred, gold)
    index = sum(_comb2(c) for c in cells.values())
    sum_pred = sum(_comb2(c) for c in pred_sizes.values())
    sum_gold = sum(_comb2(c) for c in gold_sizes.values())
    total = _comb2(n)
    # denominator (sum_pred + sum_gold)/2 - sum_pred*sum_gold/total == 0 iff
    # both partitions are all-singletons or both are one single cluster
    if total * (sum_pred + sum_gold) == 2 * sum_pred * sum_gold:
        return 1.0 if index == sum_pred == sum_gold else 0.0
    expected = sum_pred * sum_gold / total
    maximum = (sum_pred + sum_gold) / 2.0
    return (index - expected) / (maximum - expected)


def trivial_homogeneity_v(gold) -> float:
    """V-measure of the all-singletons clustering against the gold classes.

    Homogeneity is 1 by construction, so this value is the inflation floor a
    V-measure comparison has to clear.
    """
    if len(gold) == 0:
        raise EvaluationError("empty gold labelling")
    return v_measure(list(range(len(gold))), gold).v


def evaluate(pred, corpus: Corpus) -> ClusteringReport:
    """Score a full-corpus clustering against the gold labels.

    Only labelled instances enter the metrics; unaligned instances are
    ignored on both sides.
    """
    labels = list(pred)
    if len(labels) != len(corpus):
        raise EvaluationError(
            f"clustering has {len(labels)} labels but corpus has {len(corpus)} instances"
        )
    idx = corpus.labelled_indices
    if not idx:
        raise EvaluationError("corpus has no labelled instances to evaluate on")
    sub_pred = [labels[i] for i in idx]
    sub_gold = [corpus[i].gold_relation for i in idx]
    return ClusteringReport(
        b3=b_cubed(sub_pred, sub_gold),
        v=v_measure(sub_pred, sub_gold),
        ari=ari(sub_pred, sub_gold),
        n_evaluated=len(idx),
    )

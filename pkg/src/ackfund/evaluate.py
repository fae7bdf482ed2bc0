"""Publication-level recall/precision and funder-list accuracy.

A publication counts as positive for a source when that source lists at least
one funder for it. Recall and precision are computed over publications, not
over funder names; the funder lists themselves are compared only for true
positives (``list_accuracy``).
"""
from __future__ import annotations

import json
import math
import statistics
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .errors import UndefinedMetricError, ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def compute_confusion(pairs: Iterable[tuple[Iterable[str], Iterable[str]]]) -> ConfusionCounts:
    """Count (system, reference) funder-set pairs by which sides are non-empty."""
    tp = fp = fn = tn = 0
    for system, reference in pairs:
        s, r = bool(set(system)), bool(set(reference))
        if s and r:
            tp += 1
        elif s:
            fp += 1
        elif r:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def recall(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall undefined: no reference-positive publications")
    return c.tp / (c.tp + c.fn)


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision undefined: system flagged no publications")
    return c.tp / (c.tp + c.fp)


@dataclass(frozen=True)
class ListAccuracy:
    accuracy: float
    missed_any: float
    extra_any: float
    count_accuracy: float
    n: int

    def __iter__(self):
        # Unpacks as (accuracy, missed_any, extra_any).
        return iter((self.accuracy, self.missed_any, self.extra_any))


def list_accuracy(pairs: Sequence[tuple[Iterable[str], Iterable[str]]]) -> ListAccuracy:
    """Exact funder-list agreement over true-positive (system, reference) pairs.

    ``accuracy`` uses set equality; ``count_accuracy`` only asks for the same
    number of funders, which can hide a missed funder offset by an extra one.
    """
    if not pairs:
        raise UndefinedMetricError("list accuracy undefined: no true positives")
    equal = missed = extra = same_count = 0
    for system, reference in pairs:
        s, r = set(system), set(reference)
        if not s or not r:
            raise ValidationError("list_accuracy expects pairs with both sets non-empty")
        equal += s == r
        missed += bool(r - s)
        extra += bool(s - r)
        same_count += len(s) == len(r)
    n = len(pairs)
    return ListAccuracy(equal / n, missed / n, extra / n, same_count / n, n)


@dataclass(frozen=True)
class FunderStats:
    mean: float
    std: float
    max: int
    distinct: int
    n: int


def funder_stats(sets: Sequence[Iterable[str]]) -> FunderStats:
    """Mean, population std, and max of set sizes; distinct = size of the union."""
    if not sets:
        raise UndefinedMetricError("funder statistics undefined for an empty collection")
    materialized = [set(s) for s in sets]
    sizes = [len(s) for s in materialized]
    union: set[str] = set().union(*materialized)
    return FunderStats(statistics.fmean(sizes), statistics.pstdev(sizes), max(sizes),
                       len(union), len(sizes))


@dataclass(frozen=True)
class OmissionEstimate:
    inputs: dict
    estimate: float
    corpus_share: float


def estimate_unreported_funding(non_case_report_share: float, external_share: float,
                                extra_factor: float | None = None, cohort_size: int = 1,
                                corpus_size: int = 1) -> OmissionEstimate:
    """Share of a no-funder cohort that was in fact externally funded.

    ``estimate`` is the product of the given fractions. ``corpus_share`` scales
    the estimate, rounded to two decimals as in a hand-worked report, by the
    cohort's share of the corpus.
    """
    inputs = {"non_case_report_share": non_case_report_share, "external_share": external_share}
    if extra_factor is not None:
        inputs["extra_factor"] = extra_factor
    for name, value in inputs.items():
        if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
            raise ValidationError(f"{name}={value!r} is not a fraction in [0, 1]")
    if cohort_size <= 0 or corpus_size <= 0:
        raise ValidationError("cohort_size and corpus_size must be positive")
    if cohort_size > corpus_size:
        raise ValidationError("cohort_size cannot exceed corpus_size")
    estimate = math.prod(inputs.values())
    share = round(estimate, 2) * cohort_size / corpus_size
    return OmissionEstimate(inputs, estimate, share)


# ----------------------------------------------------------------- reports

@dataclass(frozen=True)
class EvaluationReport:
    counts: ConfusionCounts
    recall: float
    precision: float
    list_accuracy: float
    missed_any: float
    extra_any: float
    count_accuracy: float
    mean_funders: float
    std_funders: float
    max_funders: int
    distinct_funders: int
    system: str = "system"
    reference_stats: FunderStats | None = None
    excluded: int = 0

    @property
    def publications(self) -> int:
        return self.counts.total

    @property
    def system_funded(self) -> int:
        return self.counts.tp + self.counts.fp

    @property
    def reference_funded(self) -> int:
        return self.counts.tp + self.counts.fn

    def to_dict(self) -> dict:
        d = asdict(self)
        d["publications"] = self.publications
        d["system_funded"] = self.system_funded
        d["reference_funded"] = self.reference_funded
        d["list_accuracy_definition"] = "set equality after harmonisation"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_tsv(self) -> str:
        ref = self.reference_stats
        n = self.publications

        def pct(k: int) -> str:
            return f"{k} ({k / n:.1%})" if n else str(k)

        rows = [
            ("indicator", "reference", self.system),
            ("publications", str(n), str(n)),
            ("publications_reporting_funding", pct(self.reference_funded), pct(self.system_funded)),
            ("recall", "-", f"{self.recall:.3f}"),
            ("precision", "-", f"{self.precision:.3f}"),
            ("distinct_funders", str(ref.distinct) if ref else "-", str(self.distinct_funders)),
            ("funders_per_publication_mean", f"{ref.mean:.2f}" if ref else "-",
             f"{self.mean_funders:.2f}"),
            ("funders_per_publication_std", f"{ref.std:.2f}" if ref else "-",
             f"{self.std_funders:.2f}"),
            ("funders_per_publication_max", str(ref.max) if ref else "-", str(self.max_funders)),
            ("list_accuracy_set_equality", "-", f"{self.list_accuracy:.3f}"),
            ("list_accuracy_same_count", "-", f"{self.count_accuracy:.3f}"),
            ("tp_missed_any_funder", "-", f"{self.missed_any:.3f}"),
            ("tp_extra_funder", "-", f"{self.extra_any:.3f}"),
            ("tp/fp/fn/tn", "-",
             f"{self.counts.tp}/{self.counts.fp}/{self.counts.fn}/{self.counts.tn}"),
        ]
        return "".join("\t".join(r) + "\n" for r in rows)


def evaluate_pairs(pairs: Sequence[tuple[frozenset, frozenset]], system: str = "system",
                   excluded: int = 0) -> EvaluationReport:
    """Full report for aligned (system, reference) funder sets."""
    counts = compute_confusion(pairs)
    rec, prec = recall(counts), precision(counts)
    tp_pairs = [(s, r) for s, r in pairs if s and r]
    acc = list_accuracy(tp_pairs)
    stats = funder_stats([s for s, _ in pairs if s])
    ref_sets = [r for _, r in pairs if r]
    ref_stats = funder_stats(ref_sets) if ref_sets else None
    return EvaluationReport(
        counts=counts, recall=rec, precision=prec,
        list_accuracy=acc.accuracy, missed_any=acc.missed_any, extra_any=acc.extra_any,
        count_accuracy=acc.count_accuracy,
        mean_funders=stats.mean, std_funders=stats.std, max_funders=stats.max,
        distinct_funders=stats.distinct, system=system, reference_stats=ref_stats,
        excluded=excluded,
    )

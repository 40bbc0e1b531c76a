"""Generalized average precision over weighted gold substitutes.

Given a ranked candidate list and a gold set mapping substitutes to
positive weights, the metric credits each ranked position holding a gold
item with the running precision up to that position (precision here is the
mean gold weight over the prefix), and normalizes by the best achievable
value: the same sum computed over the gold items in weight order. Multiword
gold items and candidates are excluded before computation, with counts kept
so nothing disappears silently; an instance whose gold set empties out is
skipped, not scored 0, to keep the corpus mean unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import AggregationError, DegenerateInputError, InputError


def filter_multiword(items: Iterable[str]) -> tuple[list[str], list[str]]:
    """Partition into (kept, excluded); an item is multiword iff it contains
    internal whitespace after trimming. Order is preserved in both parts."""
    kept, excluded = [], []
    for item in items:
        if any(ch.isspace() for ch in item.strip()):
            excluded.append(item)
        else:
            kept.append(item)
    return kept, excluded


def gap(ranked: Sequence[str], gold: Mapping[str, float]) -> float:
    """Generalized average precision of one ranking against weighted gold.

    The caller is expected to have filtered multiword items already; gold
    weights must be positive.
    """
    if not gold:
        raise DegenerateInputError("empty gold set")
    if not ranked:
        raise DegenerateInputError("empty ranking")
    for sub, weight in gold.items():
        if weight <= 0:
            raise InputError(f"gold weight for {sub!r} must be positive, got {weight}")

    numerator = 0.0
    running = 0.0
    for i, candidate in enumerate(ranked, start=1):
        credit = gold.get(candidate, 0.0)
        running += credit
        if credit > 0.0:
            numerator += running / i

    # Best achievable: gold sorted by weight descending (ties by candidate
    # string; prefix means are tie-invariant, the order is fixed for
    # determinism only).
    ordered = sorted(gold.items(), key=lambda kv: (-kv[1], kv[0]))
    denominator = 0.0
    prefix = 0.0
    for j, (_, weight) in enumerate(ordered, start=1):
        prefix += weight
        denominator += prefix / j
    return numerator / denominator


@dataclass(frozen=True)
class InstanceGap:
    """Per-instance outcome; ``value`` is None iff the instance was skipped."""

    instance_id: str
    value: float | None

    @property
    def skipped(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class GapReport:
    """Corpus-level aggregation with exclusion accounting."""

    mean_gap: float
    n_instances: int
    n_skipped: int
    n_excluded_gold_multiword: int
    n_excluded_candidate_multiword: int
    per_instance: tuple[InstanceGap, ...]

    def to_json_dict(self) -> dict:
        return {
            "mean_gap": self.mean_gap,
            "n_instances": self.n_instances,
            "n_skipped": self.n_skipped,
            "n_excluded_gold_multiword": self.n_excluded_gold_multiword,
            "n_excluded_candidate_multiword": self.n_excluded_candidate_multiword,
            "per_instance": [
                {"id": item.instance_id, "gap": item.value} for item in self.per_instance
            ],
        }

    def mean_percent(self) -> str:
        """Mean formatted the way result tables print it: x100, one decimal."""
        return f"{self.mean_gap * 100.0:.1f}"


def mean_gap(
    per_instance: Sequence[InstanceGap],
    n_excluded_gold_multiword: int = 0,
    n_excluded_candidate_multiword: int = 0,
) -> GapReport:
    """Arithmetic mean over non-skipped instances."""
    values = [item.value for item in per_instance if not item.skipped]
    if not values:
        raise AggregationError("every instance was skipped; nothing to aggregate")
    return GapReport(
        mean_gap=sum(values) / len(values),
        n_instances=len(values),
        n_skipped=len(per_instance) - len(values),
        n_excluded_gold_multiword=n_excluded_gold_multiword,
        n_excluded_candidate_multiword=n_excluded_candidate_multiword,
        per_instance=tuple(per_instance),
    )


def evaluate_rankings(
    rankings: Mapping[str, Sequence[str]],
    gold_sets: Mapping[str, Mapping[str, float]],
) -> GapReport:
    """Score every ranked instance against its gold set.

    ``rankings`` maps instance id to the ordered candidate list; every id
    must appear in ``gold_sets``. Multiword filtering and skip accounting
    happen here.
    """
    orphans = [iid for iid in rankings if iid not in gold_sets]
    if orphans:
        raise InputError(f"rankings reference unknown instance ids: {sorted(orphans)}")

    per_instance: list[InstanceGap] = []
    excluded_gold = 0
    excluded_candidates = 0
    for iid, ranked in rankings.items():
        kept_ranked, dropped_ranked = filter_multiword(ranked)
        excluded_candidates += len(dropped_ranked)
        gold = gold_sets[iid]
        kept_gold, dropped_gold = filter_multiword(gold.keys())
        excluded_gold += len(dropped_gold)
        filtered_gold = {sub: gold[sub] for sub in kept_gold}
        if not filtered_gold or not kept_ranked:
            per_instance.append(InstanceGap(instance_id=iid, value=None))
            continue
        per_instance.append(InstanceGap(instance_id=iid, value=gap(kept_ranked, filtered_gold)))
    return mean_gap(
        per_instance,
        n_excluded_gold_multiword=excluded_gold,
        n_excluded_candidate_multiword=excluded_candidates,
    )

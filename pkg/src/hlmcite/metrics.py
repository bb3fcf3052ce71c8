"""Ranking metrics over graded candidate lists.

Precision counts core hits; NDCG uses the stated gain scheme with a log2
position discount, normalized by the ideal ordering of the instance's full
grade multiset, so a perfect selection in perfect order scores exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Corpus, PaperRecord, keyword_overlap
from .sampling import EvalInstance
from .vectors import RetrievalResult

CORE, SUPERFICIAL, NONE = "core", "superficial", "none"

# Binary by default: only core citations carry gain. The graded scheme keeps
# superficial citations above non-citations for NDCG sensitivity studies.
BINARY_GAINS: dict[str, float] = {CORE: 1.0, SUPERFICIAL: 0.0, NONE: 0.0}
GRADED_GAINS: dict[str, float] = {CORE: 2.0, SUPERFICIAL: 1.0, NONE: 0.0}


class MetricError(Exception):
    pass


@dataclass(frozen=True)
class GradedRanking:
    """A ranked id list with grades and the instance's full grade multiset."""

    ranked: tuple[str, ...]
    grades: Mapping[str, str]
    instance_grades: tuple[str, ...]
    gains: Mapping[str, float] = field(default_factory=lambda: dict(BINARY_GAINS))

    def __post_init__(self) -> None:
        missing = [i for i in self.ranked if i not in self.grades]
        if missing:
            raise MetricError(f"ranked ids without grades: {missing[:5]}")

    def gain_at(self, position: int) -> float:
        return self.gains[self.grades[self.ranked[position]]]

    @property
    def has_positive_gain(self) -> bool:
        return any(self.gains[g] > 0 for g in self.instance_grades)


def from_instance(
    instance: EvalInstance,
    ranked: Sequence[str],
    gains: Mapping[str, float] | None = None,
) -> GradedRanking:
    return GradedRanking(
        ranked=tuple(ranked),
        grades=instance.grades,
        instance_grades=tuple(instance.grades[c] for c in instance.candidates),
        gains=dict(gains) if gains is not None else dict(BINARY_GAINS),
    )


def precision_at_k(ranking: GradedRanking, k: int) -> float:
    """Fraction of the first k positions graded core."""
    if k < 1 or k > len(ranking.ranked):
        raise MetricError(f"k={k} out of range for ranking of length {len(ranking.ranked)}")
    hits = sum(1 for i in ranking.ranked[:k] if ranking.grades[i] == CORE)
    return hits / k


def ndcg_at_k(ranking: GradedRanking, k: int) -> float:
    """Discounted gain at k normalized by the instance-ideal ordering.

    Degenerate instances (no positive gain anywhere) are defined as 0.
    """
    if k < 1 or k > len(ranking.ranked):
        raise MetricError(f"k={k} out of range for ranking of length {len(ranking.ranked)}")
    dcg = sum(ranking.gain_at(i) / math.log2(i + 2) for i in range(k))
    ideal = sorted((ranking.gains[g] for g in ranking.instance_grades), reverse=True)
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def keyword_overlap_rank(
    query: PaperRecord,
    instance: EvalInstance,
    corpus: Corpus,
    gains: Mapping[str, float] | None = None,
) -> GradedRanking:
    """Baseline: candidates ordered by shared-keyword count, ties by id."""
    counts = {c: keyword_overlap(query, corpus[c]) for c in instance.candidates}
    ranked = sorted(instance.candidates, key=lambda c: (-counts[c], c))
    return from_instance(instance, ranked, gains)


def ranking_from_scores(
    instance: EvalInstance,
    scores: Mapping[str, float],
    gains: Mapping[str, float] | None = None,
) -> GradedRanking:
    """Order instance candidates by an external score map (desc, ties by id)."""
    missing = [c for c in instance.candidates if c not in scores]
    if missing:
        raise MetricError(
            f"external scores missing {len(missing)} candidate(s), e.g. {missing[:5]}"
        )
    ranked = sorted(instance.candidates, key=lambda c: (-scores[c], c))
    return from_instance(instance, ranked, gains)


def retrieval_ranking(
    instance: EvalInstance,
    retrieval: RetrievalResult,
    gains: Mapping[str, float] | None = None,
) -> GradedRanking:
    return from_instance(instance, retrieval.ids, gains)


def selection_ranking(
    instance: EvalInstance,
    selected: Sequence[str],
    gains: Mapping[str, float] | None = None,
) -> GradedRanking:
    return from_instance(instance, selected, gains)

"""Reproducible query sampling, train/test splitting, and task instances."""

from __future__ import annotations

import hashlib
import json
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .graph import CitationGraph, label_citations


class SamplingError(Exception):
    """Raised when a task instance cannot be constructed."""


@dataclass(frozen=True)
class QuerySample:
    """One sampled query with its drawn core/superficial citation subsets."""

    query: str
    core_ids: tuple[str, ...]
    superficial_ids: tuple[str, ...]
    seed: int


@dataclass(frozen=True)
class EvalInstance:
    """One prediction task: a query and a graded candidate pool.

    ``grades`` maps every candidate id to core, superficial, or none. The
    pool holds exactly ``t1`` core and ``t2`` superficial candidates; the
    remainder are non-citation fillers.
    """

    query: str
    candidates: tuple[str, ...]
    grades: dict[str, str]
    t_q: int
    t1: int
    t2: int


def _derived_rng(seed: int, tag: str) -> random.Random:
    # Stable across platforms and Python versions: seed the RNG from a
    # SHA-256 of (seed, tag) rather than from hash().
    digest = hashlib.sha256(f"{seed}:{tag}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def eligible_queries(graph: CitationGraph, t1: int, t2: int) -> list[str]:
    """Queries with at least t1 core and t2 superficial citations, id order."""
    out: list[str] = []
    for q in sorted(graph.nodes):
        labels = label_citations(graph, q)
        if labels.k_q >= t1 and (labels.n_q - labels.k_q) >= t2:
            out.append(q)
    return out


def sample_queries(
    graph: CitationGraph, t1: int, t2: int, count: int, seed: int
) -> list[QuerySample]:
    """Uniformly sample eligible queries and their citation subsets.

    Deterministic for a given (graph, seed). If fewer than ``count`` queries
    are eligible, all of them are returned and a warning is emitted.
    """
    if t1 < 1 or t2 < 1:
        raise ValueError("t1 and t2 must be >= 1")
    pool = eligible_queries(graph, t1, t2)
    rng = _derived_rng(seed, "query-choice")
    if len(pool) < count:
        warnings.warn(
            f"only {len(pool)} eligible queries available, requested {count}",
            stacklevel=2,
        )
        chosen = list(pool)
    else:
        chosen = rng.sample(pool, count)
    samples: list[QuerySample] = []
    for q in sorted(chosen):
        labels = label_citations(graph, q)
        sub = _derived_rng(seed, f"subsets:{q}")
        core = tuple(sorted(sub.sample(list(labels.core), t1)))
        superficial = tuple(sorted(sub.sample(list(labels.superficial), t2)))
        samples.append(QuerySample(query=q, core_ids=core, superficial_ids=superficial, seed=seed))
    return samples


def split_train_test(
    samples: Sequence[QuerySample], ratio: float, seed: int
) -> tuple[list[QuerySample], list[QuerySample]]:
    """Disjoint, union-complete split; train size = round(ratio * n)."""
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    order = list(samples)
    _derived_rng(seed, "split").shuffle(order)
    n_train = int(len(order) * ratio + 0.5)
    return order[:n_train], order[n_train:]


def build_eval_instance(
    sample: QuerySample, graph: CitationGraph, t_q: int, seed: int
) -> EvalInstance:
    """Assemble the candidate pool for one query.

    Fillers are drawn uniformly without replacement from the universe minus
    the query and everything it cites, so followers remain eligible fillers.
    The final candidate order is a seeded shuffle.
    """
    t1, t2 = len(sample.core_ids), len(sample.superficial_ids)
    if t_q < t1 + t2:
        raise SamplingError(f"t_q={t_q} smaller than t1+t2={t1 + t2}")
    q = sample.query
    cited = graph.cited_by_query(q)
    filler_pool = sorted(graph.nodes - cited - {q})
    n_fillers = t_q - t1 - t2
    if len(filler_pool) < n_fillers:
        required = t_q + 1 + len(cited) - t1 - t2
        raise SamplingError(
            f"corpus too small for t_q={t_q}: need at least {required} papers, "
            f"have {len(graph.nodes)}"
        )
    rng = _derived_rng(seed, f"instance:{q}")
    fillers = rng.sample(filler_pool, n_fillers)
    candidates = list(sample.core_ids) + list(sample.superficial_ids) + fillers
    rng.shuffle(candidates)
    grades = {c: "none" for c in candidates}
    grades.update({c: "core" for c in sample.core_ids})
    grades.update({c: "superficial" for c in sample.superficial_ids})
    return EvalInstance(
        query=q, candidates=tuple(candidates), grades=grades, t_q=t_q, t1=t1, t2=t2
    )


def save_samples(samples: Sequence[QuerySample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps({
                "query_id": s.query,
                "core_ids": list(s.core_ids),
                "superficial_ids": list(s.superficial_ids),
                "seed": s.seed,
            }) + "\n")


def load_samples(path: str | Path) -> list[QuerySample]:
    samples: list[QuerySample] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            samples.append(QuerySample(
                query=str(raw["query_id"]),
                core_ids=tuple(raw["core_ids"]),
                superficial_ids=tuple(raw["superficial_ids"]),
                seed=int(raw["seed"]),
            ))
        except (ValueError, KeyError, TypeError) as exc:
            raise SamplingError(f"{path}:{lineno}: {exc}") from exc
    return samples

"""Agentic reranking: exemption split, robust order parsing, agent loop.

With retrieval size r and target size t1, the top (2*t1 - r) retrieved
candidates are exempt from reranking; the agents rank the remaining
2*(r - t1) and the top (r - t1) picks join the exempt prefix, giving t1
selections. The intuition: the strongest retrieval hits are safe, so only
the tail is worth spending reasoning tokens on.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .chat import ChatBackend, ChatBackendError, ChatMessage, ChatResponse, estimate_tokens
from .corpus import Corpus, PaperRecord
from .prompts import (
    ExemplarPaper,
    OneShotExample,
    render_analyzer_prompt,
    render_decider_prompt,
    split_numbered_blocks,
)
from .vectors import RetrievalResult

_RANKED_LINE_RE = re.compile(r"^.*ranked order.*$", re.IGNORECASE | re.MULTILINE)
_PAPER_IDX_RE = re.compile(r"paper\s*(\d+)", re.IGNORECASE)


class PlanError(Exception):
    """Raised when a rerank plan is infeasible."""


@dataclass(frozen=True)
class RerankPlan:
    """Split of an r_q-sized retrieval list into exempt prefix and rerank pool."""

    r_q: int
    t1: int
    fixed_count: int
    pool_count: int
    slots: int
    clamped: bool = False

    def split(self, ranked_ids: Sequence[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
        if len(ranked_ids) != self.r_q:
            raise PlanError(f"expected {self.r_q} retrieved ids, got {len(ranked_ids)}")
        return tuple(ranked_ids[:self.fixed_count]), tuple(ranked_ids[self.fixed_count:])


def plan_split(r_q: int, t1: int) -> RerankPlan:
    """Exemption arithmetic: |fixed| = 2*t1 - r_q, |pool| = 2*(r_q - t1).

    When r_q > 2*t1 the exempt prefix would be negative, so it clamps to
    empty and the whole retrieval set is reranked for t1 slots (flagged).
    """
    if t1 < 1:
        raise PlanError(f"t1 must be >= 1, got {t1}")
    if r_q < t1:
        raise PlanError(f"cannot select {t1} from a retrieval of {r_q}")
    fixed = 2 * t1 - r_q
    if fixed < 0:
        return RerankPlan(r_q=r_q, t1=t1, fixed_count=0, pool_count=r_q, slots=t1, clamped=True)
    return RerankPlan(
        r_q=r_q, t1=t1, fixed_count=fixed, pool_count=r_q - fixed, slots=r_q - t1
    )


@dataclass(frozen=True)
class ParsedOrder:
    permutation: tuple[int, ...]
    status: str  # exact | repaired | fallback


def parse_ranked_order(text: str, m: int) -> ParsedOrder:
    """Extract a full permutation of 1..m from free-form decider output.

    Prefers the first "Ranked order" line; otherwise scans for "paper <i>"
    tokens in reading order. Duplicates keep their first occurrence,
    out-of-range indices are dropped, and missing indices are appended in
    original pool order, so the result is always a valid permutation.
    """
    if m < 1:
        raise ValueError("pool size must be >= 1")
    line_match = _RANKED_LINE_RE.search(text)
    raw: list[int] = []
    dirty = False
    if line_match:
        raw = [int(tok) for tok in _PAPER_IDX_RE.findall(line_match.group(0))]
    if not raw:
        # No usable "Ranked order" line: scan the whole text in reading order.
        dirty = bool(line_match)
        raw = [int(tok) for tok in _PAPER_IDX_RE.findall(text)]
    seen: list[int] = []
    for idx in raw:
        if idx < 1 or idx > m:
            dirty = True
            continue
        if idx in seen:
            dirty = True
            continue
        seen.append(idx)
    if not seen:
        return ParsedOrder(tuple(range(1, m + 1)), "fallback")
    if len(seen) < m:
        dirty = True
        seen.extend(i for i in range(1, m + 1) if i not in seen)
    status = "repaired" if dirty else "exact"
    return ParsedOrder(tuple(seen), status)


@dataclass(frozen=True)
class AgentCall:
    role: str  # analyzer | decider
    messages: tuple[ChatMessage, ...]
    output: str
    prompt_tokens: int
    completion_tokens: int
    usage_estimated: bool


@dataclass
class AgentTranscript:
    """Full record of one query's agent interaction."""

    query: str
    calls: list[AgentCall] = field(default_factory=list)
    permutation: tuple[int, ...] = ()
    parse_status: str = ""
    analyzer_split_ok: bool = True
    degraded: bool = False
    failure: str = ""

    @property
    def prompt_tokens(self) -> int:
        return sum(c.prompt_tokens for c in self.calls)

    @property
    def completion_tokens(self) -> int:
        return sum(c.completion_tokens for c in self.calls)

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class FinalSelection:
    """The t1 predicted ids: exempt prefix first, then reranked picks."""

    query: str
    selected: tuple[str, ...]
    provenance: tuple[str, ...]  # fixed-prefix | reranked, aligned with selected
    degraded: bool = False


def _record_call(
    transcript: AgentTranscript, role: str, messages: Sequence[ChatMessage], response: ChatResponse
) -> None:
    if response.usage_reported:
        prompt_tokens = int(response.prompt_tokens or 0)
        completion_tokens = int(response.completion_tokens or 0)
        estimated = False
    else:
        prompt_tokens = sum(estimate_tokens(m["content"]) for m in messages)
        completion_tokens = estimate_tokens(response.text)
        estimated = True
    transcript.calls.append(AgentCall(
        role=role,
        messages=tuple(messages),
        output=response.text,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        usage_estimated=estimated,
    ))


def rerank(
    chat: ChatBackend,
    oneshot: OneShotExample | None,
    query: PaperRecord,
    retrieval: RetrievalResult,
    t1: int,
    corpus: Corpus,
    no_analyzer: bool = False,
    no_guider: bool = False,
) -> tuple[FinalSelection, AgentTranscript]:
    """Run the analyze-then-decide pass over the rerank pool for one query.

    The pool is renumbered 1..m for the agents; the id/index map stays
    host-side. A backend that exhausts its retries degrades the query to
    retrieval order instead of aborting the run.
    """
    if no_guider:
        oneshot = None
    elif oneshot is None or not oneshot.approved:
        raise PlanError("an approved one-shot example is required outside the no-guider ablation")
    plan = plan_split(retrieval.r_q, t1)
    fixed_ids, pool_ids = plan.split(retrieval.ids)
    transcript = AgentTranscript(query=query.id)
    pool_records = [corpus[pid] for pid in pool_ids]

    if plan.slots == 0:
        transcript.parse_status = "exact"
        transcript.permutation = ()
        return _assemble(query.id, fixed_ids, pool_ids, (), plan), transcript

    try:
        if no_analyzer:
            # Decider ranks raw titles and abstracts directly.
            analyses = [(p.title, p.abstract) for p in pool_records]
        else:
            messages = render_analyzer_prompt(oneshot, query, pool_records)
            response = chat.complete(messages)
            _record_call(transcript, "analyzer", messages, response)
            blocks = split_numbered_blocks(response.text, len(pool_records))
            if blocks is None:
                transcript.analyzer_split_ok = False
                blocks = [response.text] * len(pool_records)
            analyses = list(zip((p.title for p in pool_records), blocks))
        messages = render_decider_prompt(oneshot, query, analyses)
        response = chat.complete(messages)
        _record_call(transcript, "decider", messages, response)
    except ChatBackendError as exc:
        transcript.degraded = True
        transcript.failure = str(exc)
        selection = FinalSelection(
            query=query.id,
            selected=tuple(retrieval.ids[:t1]),
            provenance=tuple(
                "fixed-prefix" if i < plan.fixed_count else "reranked" for i in range(t1)
            ),
            degraded=True,
        )
        return selection, transcript

    parsed = parse_ranked_order(response.text, len(pool_ids))
    transcript.permutation = parsed.permutation
    transcript.parse_status = parsed.status
    picks = tuple(pool_ids[i - 1] for i in parsed.permutation[:plan.slots])
    return _assemble(query.id, fixed_ids, pool_ids, picks, plan), transcript


def _assemble(
    query_id: str,
    fixed_ids: tuple[str, ...],
    pool_ids: tuple[str, ...],
    picks: tuple[str, ...],
    plan: RerankPlan,
) -> FinalSelection:
    selected = fixed_ids + picks
    assert len(selected) == plan.t1
    provenance = ("fixed-prefix",) * len(fixed_ids) + ("reranked",) * len(picks)
    return FinalSelection(query=query_id, selected=selected, provenance=provenance)


def rerank_many(
    chat: ChatBackend,
    oneshot_for_query: Callable[[PaperRecord], OneShotExample | None],
    queries: Sequence[PaperRecord],
    retrievals: dict[str, RetrievalResult],
    t1: int,
    corpus: Corpus,
    workers: int = 4,
    no_analyzer: bool = False,
    no_guider: bool = False,
) -> dict[str, tuple[FinalSelection, AgentTranscript]]:
    """Bounded worker pool over queries; analyzer/decider stay sequential
    within a query. Output is keyed by query id so completion order never
    affects results."""

    def run(record: PaperRecord) -> tuple[str, tuple[FinalSelection, AgentTranscript]]:
        result = rerank(
            chat, oneshot_for_query(record), record, retrievals[record.id], t1, corpus,
            no_analyzer=no_analyzer, no_guider=no_guider,
        )
        return record.id, result

    results: dict[str, tuple[FinalSelection, AgentTranscript]] = {}
    if workers <= 1:
        for record in queries:
            qid, res = run(record)
            results[qid] = res
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for qid, res in pool.map(run, queries):
                results[qid] = res
    return results


def build_oneshot(
    chat: ChatBackend,
    query: ExemplarPaper,
    candidates: Sequence[ExemplarPaper],
    ground_truth_order: Sequence[int],
) -> tuple[str, str]:
    """Guider pass: produce draft analysis and ranking texts for an exemplar.

    Runs the analyze-decide procedure without any exemplar prefix; the draft
    is then reviewed and revised by a human before approval.
    """
    query_record = PaperRecord(
        id="exemplar-query", title=query.title, abstract=query.abstract
    )
    pool_records = [
        PaperRecord(id=f"exemplar-{i}", title=c.title, abstract=c.abstract)
        for i, c in enumerate(candidates, start=1)
    ]
    messages = render_analyzer_prompt(None, query_record, pool_records)
    analysis = chat.complete(messages).text
    blocks = split_numbered_blocks(analysis, len(pool_records))
    if blocks is None:
        blocks = [analysis] * len(pool_records)
    decider_messages = render_decider_prompt(
        None, query_record, list(zip((c.title for c in candidates), blocks))
    )
    ranking = chat.complete(decider_messages).text
    return analysis, ranking

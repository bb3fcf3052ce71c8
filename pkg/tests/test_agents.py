import pytest

from hlmcite.chat import (
    CachingChatBackend,
    FailingChatMock,
    IdentityChatMock,
    OracleChatMock,
    ResponseCache,
    ScriptedChatMock,
)
from hlmcite.corpus import Corpus, PaperRecord
from hlmcite.prompts import ExemplarPaper, default_oneshot_root, load_oneshot
from hlmcite.rerank import PlanError, build_oneshot, rerank
from hlmcite.vectors import RetrievalResult


def make_setup(n_candidates=8):
    query = PaperRecord(id="q", title="Query study", abstract="About lattices.")
    cands = [
        PaperRecord(id=f"c{i}", title=f"Candidate {i}", abstract=f"Body {i}.")
        for i in range(n_candidates)
    ]
    corpus = Corpus([query] + cands)
    ranked = tuple((f"c{i}", float(n_candidates - i)) for i in range(n_candidates))
    retrieval = RetrievalResult(query="q", ranked=ranked, r_q=n_candidates)
    return corpus, query, retrieval


ONESHOT = load_oneshot(default_oneshot_root() / "default")


def test_identity_mock_equals_retrieval_top_t1():
    corpus, query, retrieval = make_setup()
    selection, transcript = rerank(IdentityChatMock(), ONESHOT, query, retrieval, 5, corpus)
    assert selection.selected == tuple(f"c{i}" for i in range(5))
    assert selection.provenance == ("fixed-prefix", "fixed-prefix", "reranked", "reranked", "reranked")
    assert transcript.parse_status == "exact"
    assert not selection.degraded


def test_scripted_pool_permutation_applied():
    corpus, query, retrieval = make_setup()
    analyzer_reply = "\n".join(f"{i}. Relevance: noted." for i in range(1, 7))
    decider_reply = "Ranked order: paper 4, paper 1, paper 6, paper 2, paper 3, paper 5"
    chat = ScriptedChatMock([analyzer_reply, decider_reply])
    selection, transcript = rerank(chat, ONESHOT, query, retrieval, 5, corpus)
    # pool is c2..c7; permutation 4,1,6 picks c5, c2, c7
    assert selection.selected == ("c0", "c1", "c5", "c2", "c7")
    assert transcript.permutation == (4, 1, 6, 2, 3, 5)
    assert transcript.analyzer_split_ok


def test_oracle_mock_moves_pool_cores_forward():
    corpus, query, retrieval = make_setup()
    cores = {"c6", "c7"}  # sit at the back of the pool
    oracle = OracleChatMock({"Query study": {corpus[c].title for c in cores}})
    selection, _ = rerank(oracle, ONESHOT, query, retrieval, 5, corpus)
    assert selection.selected[:2] == ("c0", "c1")
    assert set(selection.selected[2:]) == {"c6", "c7", "c2"}


def test_unsplittable_analyzer_output_attaches_whole_text():
    corpus, query, retrieval = make_setup()
    chat = ScriptedChatMock(["free-form analysis without numbering",
                             "Ranked order: paper 1, paper 2, paper 3, paper 4, paper 5, paper 6"])
    selection, transcript = rerank(chat, ONESHOT, query, retrieval, 5, corpus)
    assert not transcript.analyzer_split_ok
    assert selection.selected == tuple(f"c{i}" for i in range(5))


def test_failing_backend_degrades_to_retrieval_order():
    corpus, query, retrieval = make_setup()
    selection, transcript = rerank(FailingChatMock(), ONESHOT, query, retrieval, 5, corpus)
    assert selection.degraded and transcript.degraded
    assert selection.selected == tuple(f"c{i}" for i in range(5))
    assert "failure" in transcript.failure or transcript.failure


def test_token_totals_sum_over_calls():
    corpus, query, retrieval = make_setup()
    _, transcript = rerank(IdentityChatMock(), ONESHOT, query, retrieval, 5, corpus)
    assert len(transcript.calls) == 2
    assert transcript.prompt_tokens == sum(c.prompt_tokens for c in transcript.calls)
    assert transcript.completion_tokens == sum(c.completion_tokens for c in transcript.calls)
    assert transcript.total_tokens == transcript.prompt_tokens + transcript.completion_tokens
    assert all(c.usage_estimated for c in transcript.calls)  # mocks report no usage
    assert all(c.prompt_tokens > 0 for c in transcript.calls)


def test_no_guider_prompts_contain_no_exemplar():
    corpus, query, retrieval = make_setup()
    _, transcript = rerank(
        IdentityChatMock(), None, query, retrieval, 5, corpus, no_guider=True
    )
    for call in transcript.calls:
        user = call.messages[-1]["content"]
        assert "Transformer-XL" not in user
        assert user.count("query paper. Title:") == 1


def test_missing_approved_oneshot_outside_ablation_errors():
    corpus, query, retrieval = make_setup()
    with pytest.raises(PlanError, match="approved one-shot"):
        rerank(IdentityChatMock(), None, query, retrieval, 5, corpus)


def test_no_analyzer_sends_single_decider_call():
    corpus, query, retrieval = make_setup()
    chat = IdentityChatMock()
    selection, transcript = rerank(
        chat, ONESHOT, query, retrieval, 5, corpus, no_analyzer=True
    )
    assert [c.role for c in transcript.calls] == ["decider"]
    assert selection.selected == tuple(f"c{i}" for i in range(5))
    assert chat.calls == 1


def test_r_equals_t1_needs_no_backend():
    corpus, query, retrieval = make_setup(5)
    chat = FailingChatMock()
    selection, transcript = rerank(chat, ONESHOT, query, retrieval, 5, corpus)
    assert selection.selected == tuple(f"c{i}" for i in range(5))
    assert chat.calls == 0 and transcript.calls == []


def test_cache_transparency(tmp_path):
    corpus, query, retrieval = make_setup()
    cache = ResponseCache(tmp_path / "cache")
    cold = CachingChatBackend(inner=IdentityChatMock(), cache=cache)
    first, _ = rerank(cold, ONESHOT, query, retrieval, 5, corpus)
    assert cold.calls_issued == 2
    warm_inner = IdentityChatMock()
    warm = CachingChatBackend(inner=warm_inner, cache=cache)
    second, _ = rerank(warm, ONESHOT, query, retrieval, 5, corpus)
    assert warm.calls_issued == 0 and warm.cache_hits == 2
    assert warm_inner.calls == 0
    assert first == second


def test_build_oneshot_runs_guider_pass():
    analyzer_reply = "1. Relevance: grounding.\n2. Relevance: context."
    decider_reply = "Ranked order: paper 2, paper 1"
    chat = ScriptedChatMock([analyzer_reply, decider_reply])
    analysis, ranking = build_oneshot(
        chat,
        ExemplarPaper("Exemplar Query", "Body."),
        [ExemplarPaper("One", "A."), ExemplarPaper("Two", "B.")],
        ground_truth_order=[2, 1],
    )
    assert analysis == analyzer_reply
    assert ranking == decider_reply
    assert chat.calls == 2

import itertools
import math
import random

import pytest

from hlmcite.corpus import Corpus, PaperRecord
from hlmcite.metrics import (
    BINARY_GAINS,
    GRADED_GAINS,
    GradedRanking,
    MetricError,
    keyword_overlap_rank,
    ndcg_at_k,
    precision_at_k,
    ranking_from_scores,
)
from hlmcite.sampling import EvalInstance

GRADES = ("core", "superficial", "none")


def make_ranking(grade_seq, gains=None):
    ids = tuple(f"i{n}" for n in range(len(grade_seq)))
    return GradedRanking(
        ranked=ids,
        grades=dict(zip(ids, grade_seq)),
        instance_grades=tuple(grade_seq),
        gains=dict(gains or BINARY_GAINS),
    )


def ref_precision(grade_seq, k):
    hits = 0
    for g in grade_seq[:k]:
        if g == "core":
            hits += 1
    return hits / k


def ref_ndcg(grade_seq, gains, k):
    dcg = 0.0
    for i, g in enumerate(grade_seq[:k]):
        dcg += gains[g] / math.log2(i + 2)
    ideal = sorted((gains[g] for g in grade_seq), reverse=True)
    idcg = 0.0
    for i, gain in enumerate(ideal[:k]):
        idcg += gain / math.log2(i + 2)
    return dcg / idcg if idcg > 0 else 0.0


def test_precision_saturation_and_counting():
    assert precision_at_k(make_ranking(["core"] * 5), 5) == 1.0
    seq = ["core", "core", "none", "core", "none"]
    assert precision_at_k(make_ranking(seq), 5) == pytest.approx(0.6)


def test_precision_k_out_of_range():
    with pytest.raises(MetricError):
        precision_at_k(make_ranking(["core"]), 2)


def test_ndcg_perfect_ordering_is_one():
    seq = ["core", "core", "superficial", "none"]
    assert ndcg_at_k(make_ranking(seq), 2) == pytest.approx(1.0)
    assert ndcg_at_k(make_ranking(["core", "none"]), 1) == pytest.approx(1.0)


def test_ndcg_worked_example():
    # ranking [core, none, core], instance holds exactly 2 cores, k=3:
    # (1/log2(2) + 1/log2(4)) / (1/log2(2) + 1/log2(3))
    value = ndcg_at_k(make_ranking(["core", "none", "core"]), 3)
    expected = (1 / math.log2(2) + 1 / math.log2(4)) / (1 / math.log2(2) + 1 / math.log2(3))
    assert value == pytest.approx(expected, abs=1e-12)
    assert value == pytest.approx(0.9197207, abs=1e-6)


def test_ndcg_degenerate_all_zero_gain():
    assert ndcg_at_k(make_ranking(["none", "superficial"]), 2) == 0.0
    ranking = make_ranking(["none", "superficial"])
    assert not ranking.has_positive_gain


def test_metrics_match_reference_on_all_small_sequences():
    for m in range(1, 6):
        for seq in itertools.product(GRADES, repeat=m):
            for gains in (BINARY_GAINS, GRADED_GAINS):
                ranking = make_ranking(list(seq), gains)
                for k in range(1, m + 1):
                    assert precision_at_k(ranking, k) == pytest.approx(
                        ref_precision(seq, k), abs=1e-12
                    )
                    assert ndcg_at_k(ranking, k) == pytest.approx(
                        ref_ndcg(seq, gains, k), abs=1e-12
                    )


def test_swap_monotonicity_sample():
    rng = random.Random(2024)
    for _ in range(500):
        m = rng.randint(2, 8)
        seq = [rng.choice(GRADES) for _ in range(m)]
        k = rng.randint(1, m)
        i, j = sorted(rng.sample(range(m), 2))
        gains = GRADED_GAINS
        if gains[seq[i]] >= gains[seq[j]]:
            continue  # only swaps moving a higher-gain item upward
        before = ndcg_at_k(make_ranking(seq, gains), k)
        seq[i], seq[j] = seq[j], seq[i]
        after = ndcg_at_k(make_ranking(seq, gains), k)
        assert after >= before - 1e-12


def _instance():
    candidates = ("a", "b", "c", "d")
    grades = {"a": "core", "b": "superficial", "c": "none", "d": "core"}
    return EvalInstance(query="q", candidates=candidates, grades=grades, t_q=4, t1=2, t2=1)


def test_keyword_baseline_orders_by_overlap_then_id():
    inst = _instance()
    query = PaperRecord(id="q", title="Q", abstract="x", keywords=("k1", "k2"))
    papers = [query]
    overlap_kws = {"a": ("k1", "k2"), "d": ("k1",), "b": (), "c": ()}
    for cid in inst.candidates:
        papers.append(PaperRecord(id=cid, title=cid.upper(), abstract="x", keywords=overlap_kws[cid]))
    corpus = Corpus(papers)
    ranking = keyword_overlap_rank(query, inst, corpus)
    assert ranking.ranked == ("a", "d", "b", "c")  # counts 2,1,0,0; ties by id


def test_keyword_baseline_all_zero_falls_back_to_id_order():
    inst = _instance()
    papers = [PaperRecord(id="q", title="Q", abstract="x")]
    papers += [PaperRecord(id=c, title=c.upper(), abstract="x") for c in inst.candidates]
    corpus = Corpus(papers)
    ranking = keyword_overlap_rank(corpus["q"], inst, corpus)
    assert ranking.ranked == ("a", "b", "c", "d")


def test_external_scores_ranking_and_missing_error():
    inst = _instance()
    ranking = ranking_from_scores(inst, {"a": 0.1, "b": 0.9, "c": 0.5, "d": 0.5})
    assert ranking.ranked == ("b", "c", "d", "a")
    with pytest.raises(MetricError, match="missing"):
        ranking_from_scores(inst, {"a": 1.0})


def test_ranked_ids_must_have_grades():
    with pytest.raises(MetricError):
        GradedRanking(ranked=("x",), grades={}, instance_grades=("core",))

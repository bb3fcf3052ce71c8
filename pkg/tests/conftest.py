import pytest

from hlmcite.corpus import Corpus, PaperRecord
from hlmcite.graph import build_graph
from hlmcite.toy import generate_toy_corpus


def make_corpus(ids, field="physics"):
    return Corpus(
        PaperRecord(id=i, title=f"Paper {i}", abstract=f"About {i}.", field=field)
        for i in ids
    )


@pytest.fixture(scope="session")
def toy():
    corpus, edges = generate_toy_corpus(seed=7, n_queries=100)
    graph, report = build_graph(corpus, edges)
    return corpus, edges, graph, report


@pytest.fixture()
def small_corpus():
    return make_corpus([f"p{i:02d}" for i in range(12)])

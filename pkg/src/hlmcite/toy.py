"""Bundled synthetic corpus with a planted citation structure.

Roughly 200 papers: 100 query papers each citing 5 foundation and 5 context
papers, plus followers that cite each query together with its foundations
(and never its context citations). Labeling therefore recovers exactly the
planted 5/5 core/superficial split for every query, so CI and acceptance
runs need no external data.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import Corpus, PaperRecord, SCIENTIFIC_FIELDS, save_corpus

_WORDS = (
    "lattice signal polymer circuit neuron genome orbit catalyst tensor market "
    "habitat sediment alloy quorum syntax ledger proof vaccine glacier archive "
    "kernel enzyme beam drift flux mesh graphite isotope liquidity doctrine"
).split()

_FIELDS = sorted(SCIENTIFIC_FIELDS)


def _sentence(rng: random.Random, topic: str, n: int = 14) -> str:
    words = [topic] + rng.choices(_WORDS, k=n)
    rng.shuffle(words)
    return " ".join(words) + "."


def _record(pid: str, kind: str, topic: str, keywords: list[str], field: str,
            year: int, rng: random.Random) -> PaperRecord:
    return PaperRecord(
        id=pid,
        title=f"{kind.capitalize()} {pid}: {topic} {rng.choice(_WORDS)}",
        abstract=f"{_sentence(rng, topic)} {_sentence(rng, topic)}",
        keywords=tuple(keywords),
        field=field,
        year=year,
    )


def generate_toy_corpus(
    seed: int = 7,
    n_queries: int = 100,
    pool_size: int = 25,
    n_distractors: int = 10,
) -> tuple[Corpus, list[tuple[str, str]]]:
    """Build the planted corpus and its citation edge list."""
    rng = random.Random(seed)
    records: list[PaperRecord] = []
    topics = {i: rng.choice(_WORDS) for i in range(pool_size)}

    foundation = [f"A{i:03d}" for i in range(pool_size)]
    context = [f"B{i:03d}" for i in range(pool_size)]
    for i, pid in enumerate(foundation):
        records.append(_record(
            pid, "foundation", topics[i], [f"kw-a{i}", f"kw-a{i}-alt", "kw-shared"],
            _FIELDS[i % len(_FIELDS)], 1990 + i % 20, rng,
        ))
    for i, pid in enumerate(context):
        records.append(_record(
            pid, "context", topics[(i * 3) % pool_size], [f"kw-b{i}"],
            _FIELDS[(i + 7) % len(_FIELDS)], 1990 + i % 20, rng,
        ))

    edges: list[tuple[str, str]] = []
    queries = [f"Q{i:03d}" for i in range(n_queries)]
    core_of: dict[str, list[str]] = {}
    for i, pid in enumerate(queries):
        cores = rng.sample(foundation, 5)
        superficials = rng.sample(context, 5)
        core_of[pid] = cores
        # Queries inherit keywords mostly from their foundations, so keyword
        # overlap favours cores.
        kws = [f"kw-a{foundation.index(c)}" for c in cores[:3]] + ["kw-shared", f"kw-q{i}"]
        records.append(_record(
            pid, "query", topics[i % pool_size], kws, _FIELDS[i % len(_FIELDS)],
            2015 + i % 5, rng,
        ))
        edges.extend((pid, cited) for cited in cores + superficials)

    n_followers = (n_queries + 1) // 2
    for j in range(n_followers):
        pid = f"F{j:03d}"
        witnessed = queries[2 * j:2 * j + 2]
        records.append(_record(
            pid, "follower", topics[j % pool_size], [f"kw-f{j}"],
            _FIELDS[j % len(_FIELDS)], 2021, rng,
        ))
        cited: dict[str, None] = {}
        for q in witnessed:
            cited[q] = None
            for c in core_of[q]:  # pair cores may overlap; cite each once
                cited[c] = None
        edges.extend((pid, c) for c in cited)

    for d in range(n_distractors):
        pid = f"X{d:03d}"
        records.append(_record(
            pid, "distractor", rng.choice(_WORDS), [f"kw-x{d}"],
            _FIELDS[d % len(_FIELDS)], 2000 + d, rng,
        ))

    return Corpus(records), edges


def write_toy_corpus(outdir: str | Path, seed: int = 7, n_queries: int = 100) -> dict[str, Path]:
    """Write corpus.jsonl and edges.csv for the toy dataset."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    corpus, edges = generate_toy_corpus(seed=seed, n_queries=n_queries)
    corpus_path = outdir / "corpus.jsonl"
    edges_path = outdir / "edges.csv"
    save_corpus(corpus, corpus_path)
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("citing_id,cited_id\n")
        for citing, cited in edges:
            fh.write(f"{citing},{cited}\n")
    return {"corpus": corpus_path, "edges": edges_path}

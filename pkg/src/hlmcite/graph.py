"""Citation graph, edge loading, and core/superficial labeling.

A cited paper counts as core for a query when at least one follower of the
query (a later paper citing it) also cites that same paper; every other
citation is superficial.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Corpus


class GraphError(Exception):
    """Raised on unreadable edge input or unknown nodes."""


@dataclass(frozen=True)
class GraphLoadReport:
    nodes: int
    edges: int
    dropped_dangling: int
    dropped_self: int
    dropped_duplicate: int

    def to_dict(self) -> dict[str, int]:
        return {
            "nodes": self.nodes,
            "edges": self.edges,
            "dropped_dangling": self.dropped_dangling,
            "dropped_self": self.dropped_self,
            "dropped_duplicate": self.dropped_duplicate,
        }


class CitationGraph:
    """Immutable directed citation graph over a fixed node set.

    ``out_edges[q]`` is the set of papers q cites; ``in_edges[q]`` the set of
    papers citing q. The in-map is always the exact transpose of the out-map.
    """

    def __init__(self, nodes: Iterable[str], out_edges: Mapping[str, frozenset[str]]):
        self._nodes = frozenset(nodes)
        self._out: dict[str, frozenset[str]] = {
            n: frozenset(out_edges.get(n, frozenset())) for n in self._nodes
        }
        in_build: dict[str, set[str]] = {n: set() for n in self._nodes}
        for src, dsts in self._out.items():
            for dst in dsts:
                in_build[dst].add(src)
        self._in: dict[str, frozenset[str]] = {n: frozenset(s) for n, s in in_build.items()}

    @property
    def nodes(self) -> frozenset[str]:
        return self._nodes

    def __contains__(self, node: str) -> bool:
        return node in self._nodes

    def cited_by_query(self, q: str) -> frozenset[str]:
        """Papers q cites (its citation set)."""
        self._check(q)
        return self._out[q]

    def followers(self, q: str) -> frozenset[str]:
        """Papers citing q."""
        self._check(q)
        return self._in[q]

    def out_map(self) -> dict[str, frozenset[str]]:
        return dict(self._out)

    def in_map(self) -> dict[str, frozenset[str]]:
        return dict(self._in)

    def edge_count(self) -> int:
        return sum(len(d) for d in self._out.values())

    def _check(self, node: str) -> None:
        if node not in self._nodes:
            raise GraphError(f"unknown node {node!r}")


@dataclass(frozen=True)
class CoreLabelResult:
    """Partition of a query's citation set into core and superficial ids."""

    query: str
    core: tuple[str, ...]
    superficial: tuple[str, ...]
    n_q: int
    k_q: int
    m_q: int


def load_edges(path: str | Path) -> list[tuple[str, str]]:
    """Read a citation edge CSV with header ``citing_id,cited_id``."""
    path = Path(path)
    edges: list[tuple[str, str]] = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["citing_id", "cited_id"]:
                raise GraphError(
                    f"{path}:1: expected header 'citing_id,cited_id', got {header!r}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2 or not row[0] or not row[1]:
                    raise GraphError(f"{path}:{lineno}: malformed edge row {row!r}")
                edges.append((row[0], row[1]))
    except OSError as exc:
        raise GraphError(f"cannot read edge file {path}: {exc}") from exc
    return edges


def build_graph(
    corpus: Corpus, edges: Iterable[tuple[str, str]]
) -> tuple[CitationGraph, GraphLoadReport]:
    """Build the graph over the corpus node set.

    Dangling, self, and duplicate edges are dropped and counted.
    """
    nodes = set(corpus.ids)
    out_build: dict[str, set[str]] = {}
    dangling = dup = selfloop = 0
    for citing, cited in edges:
        if citing not in nodes or cited not in nodes:
            dangling += 1
            continue
        if citing == cited:
            selfloop += 1
            continue
        dsts = out_build.setdefault(citing, set())
        if cited in dsts:
            dup += 1
            continue
        dsts.add(cited)
    graph = CitationGraph(nodes, {k: frozenset(v) for k, v in out_build.items()})
    report = GraphLoadReport(
        nodes=len(nodes),
        edges=graph.edge_count(),
        dropped_dangling=dangling,
        dropped_self=selfloop,
        dropped_duplicate=dup,
    )
    return graph, report


def label_citations(graph: CitationGraph, q: str) -> CoreLabelResult:
    """Split q's citations into core and superficial.

    A citation s is core when some follower p of q cites both q and s.
    Ordering is ascending id for reproducibility.
    """
    cited = graph.cited_by_query(q)
    followers = graph.followers(q)
    witnessed: set[str] = set()
    for p in followers:
        follower_cites = graph.cited_by_query(p)
        if q in follower_cites:
            witnessed.update(follower_cites & cited)
    core = tuple(sorted(witnessed))
    superficial = tuple(sorted(cited - witnessed))
    return CoreLabelResult(
        query=q,
        core=core,
        superficial=superficial,
        n_q=len(cited),
        k_q=len(core),
        m_q=len(followers),
    )

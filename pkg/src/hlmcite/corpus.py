"""Paper corpus: records, JSONL loading, and keyword overlap."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

NATURAL_SCIENCE_FIELDS = frozenset({
    "biology", "chemistry", "computer science", "engineering",
    "environmental science", "geography", "geology", "materials science",
    "mathematics", "medicine", "physics",
})
SOCIAL_SCIENCE_FIELDS = frozenset({
    "art", "business", "economics", "history", "philosophy",
    "political science", "psychology", "sociology",
})
SCIENTIFIC_FIELDS = NATURAL_SCIENCE_FIELDS | SOCIAL_SCIENCE_FIELDS


class CorpusError(Exception):
    """Raised on unreadable or invalid corpus input."""


@dataclass(frozen=True)
class PaperRecord:
    """One paper: textual content plus metadata.

    ``abstract`` may be empty; such records embed from the title alone and
    are flagged in the load report rather than dropped.
    """

    id: str
    title: str
    abstract: str
    keywords: tuple[str, ...] = ()
    field: str = "computer science"
    year: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("paper id must be nonempty")
        if not self.title:
            raise CorpusError(f"paper {self.id!r}: title must be nonempty")
        if self.field not in SCIENTIFIC_FIELDS:
            raise CorpusError(
                f"paper {self.id!r}: unknown field {self.field!r} "
                f"(expected one of the {len(SCIENTIFIC_FIELDS)} scientific fields)"
            )


@dataclass(frozen=True)
class CorpusLoadReport:
    records: int
    empty_abstracts: int
    empty_abstract_ids: tuple[str, ...] = ()


class Corpus:
    """Immutable, insertion-ordered id -> PaperRecord map."""

    def __init__(self, records: Iterable[PaperRecord]):
        self._records: dict[str, PaperRecord] = {}
        for rec in records:
            if rec.id in self._records:
                raise CorpusError(f"duplicate paper id {rec.id!r}")
            self._records[rec.id] = rec

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._records

    def __getitem__(self, paper_id: str) -> PaperRecord:
        try:
            return self._records[paper_id]
        except KeyError:
            raise KeyError(f"unknown paper id {paper_id!r}") from None

    def __iter__(self) -> Iterator[PaperRecord]:
        return iter(self._records.values())

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._records)

    def empty_abstract_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self if not r.abstract)


def load_corpus(path: str | Path) -> tuple[Corpus, CorpusLoadReport]:
    """Load a JSONL corpus file.

    Each line holds keys id, title, abstract, keywords (array), field, year.
    Unreadable lines are fatal and reported with their line number.
    """
    path = Path(path)
    records: list[PaperRecord] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            records.append(
                PaperRecord(
                    id=str(raw["id"]),
                    title=str(raw["title"]),
                    abstract=str(raw.get("abstract", "")),
                    keywords=tuple(str(k) for k in raw.get("keywords", [])),
                    field=str(raw["field"]),
                    year=int(raw.get("year", 0)),
                )
            )
        except (ValueError, KeyError, TypeError, CorpusError) as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    corpus = Corpus(records)
    empty = corpus.empty_abstract_ids()
    report = CorpusLoadReport(
        records=len(corpus), empty_abstracts=len(empty), empty_abstract_ids=empty
    )
    return corpus, report


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus:
            fh.write(json.dumps({
                "id": rec.id,
                "title": rec.title,
                "abstract": rec.abstract,
                "keywords": list(rec.keywords),
                "field": rec.field,
                "year": rec.year,
            }, ensure_ascii=False) + "\n")


def keyword_overlap(a: PaperRecord, b: PaperRecord) -> int:
    """Count shared keywords after case-folding, exact string match."""
    ka = {k.casefold() for k in a.keywords}
    kb = {k.casefold() for k in b.keywords}
    return len(ka & kb)

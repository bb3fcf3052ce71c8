"""Dense vector store with exact inner-product top-k and HLMV file I/O.

Search is a single brute-force scan: candidate sets stay small enough
(<= 100K) that an exact linear pass beats any approximate index, and scores
are the raw inner products with no normalization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

HLMV_MAGIC = b"HLMV"
HLMV_VERSION = 1


class VectorStoreError(Exception):
    """Raised on malformed vector files or inconsistent queries."""


@dataclass(frozen=True)
class RetrievalResult:
    """Top-k candidates for one query, scores non-increasing, ties id-ascending."""

    query: str
    ranked: tuple[tuple[str, float], ...]
    r_q: int

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.ranked)


class VectorStore:
    """Immutable id -> float32 vector map with exact top-k retrieval."""

    def __init__(self, ids: Sequence[str], matrix: np.ndarray):
        ids = tuple(ids)
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise VectorStoreError("matrix must be 2-dimensional")
        if len(ids) != matrix.shape[0]:
            raise VectorStoreError(
                f"id count {len(ids)} does not match row count {matrix.shape[0]}"
            )
        if len(set(ids)) != len(ids):
            raise VectorStoreError("duplicate ids in vector store")
        if matrix.size and not np.isfinite(matrix).all():
            raise VectorStoreError("non-finite components in vector store")
        self._ids = ids
        self._matrix = matrix
        self._matrix.setflags(write=False)
        self._row: dict[str, int] = {pid: i for i, pid in enumerate(ids)}
        # Rank of each row in ascending-id order, used as the tie-break key.
        self._id_rank = np.empty(len(ids), dtype=np.int64)
        for rank, pid in enumerate(sorted(ids)):
            self._id_rank[self._row[pid]] = rank

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._row

    def vector(self, paper_id: str) -> np.ndarray:
        try:
            return self._matrix[self._row[paper_id]]
        except KeyError:
            raise VectorStoreError(f"unknown id {paper_id!r} in vector store") from None

    def scores(self, query_vec: np.ndarray, candidate_ids: Sequence[str] | None = None) -> np.ndarray:
        """Inner products of the query against candidate rows (store order)."""
        q = np.asarray(query_vec, dtype=np.float32)
        if q.shape != (self._matrix.shape[1],):
            raise VectorStoreError(
                f"query dim {q.shape} does not match store dim ({self._matrix.shape[1]},)"
            )
        if candidate_ids is None:
            return self._matrix @ q
        rows = self._candidate_rows(candidate_ids)
        return self._matrix[rows] @ q

    def _candidate_rows(self, candidate_ids: Sequence[str]) -> np.ndarray:
        rows = np.empty(len(candidate_ids), dtype=np.int64)
        for i, cid in enumerate(candidate_ids):
            row = self._row.get(cid)
            if row is None:
                raise VectorStoreError(f"unknown candidate id {cid!r}")
            rows[i] = row
        return rows


def top_k(
    store: VectorStore,
    query_vec: np.ndarray,
    candidate_ids: Sequence[str] | None,
    k: int,
    query_id: str = "",
) -> RetrievalResult:
    """Exact top-k by inner product over a candidate subset.

    Equals the first k rows of a full sort by (score descending, id
    ascending). ``candidate_ids=None`` scans the whole store without copying
    any rows.
    """
    q = np.asarray(query_vec, dtype=np.float32)
    if q.shape != (store.dim,):
        raise VectorStoreError(f"query dim {q.shape} does not match store dim ({store.dim},)")
    if candidate_ids is None:
        n = len(store)
        scores = store.matrix @ q
        ranks = store._id_rank
        row_of = None
    else:
        n = len(candidate_ids)
        rows = store._candidate_rows(candidate_ids)
        scores = store.matrix[rows] @ q
        ranks = store._id_rank[rows]
        row_of = rows
    if k > n:
        raise VectorStoreError(f"k={k} exceeds candidate count {n}")
    # lexsort uses the last key as primary: score descending, then id rank.
    order = np.lexsort((ranks, -scores))[:k]
    ids = store.ids
    if row_of is None:
        ranked = tuple((ids[i], float(scores[i])) for i in order)
    else:
        ranked = tuple((ids[row_of[i]], float(scores[i])) for i in order)
    return RetrievalResult(query=query_id, ranked=ranked, r_q=k)


def build_store(pairs: Iterable[tuple[str, np.ndarray]], dim: int) -> VectorStore:
    ids: list[str] = []
    rows: list[np.ndarray] = []
    for pid, vec in pairs:
        ids.append(pid)
        rows.append(np.asarray(vec, dtype=np.float32))
    matrix = np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float32)
    return VectorStore(ids, matrix)


def save_store(store: VectorStore, path: str | Path) -> None:
    """Write the HLMV binary format (little-endian, float32 rows)."""
    with open(path, "wb") as fh:
        fh.write(HLMV_MAGIC)
        fh.write(struct.pack("<II", HLMV_VERSION, store.matrix.shape[1]))
        fh.write(struct.pack("<Q", len(store)))
        for pid in store.ids:
            raw = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(store.matrix, dtype="<f4").tobytes())


def load_store(path: str | Path) -> VectorStore:
    """Read an HLMV file; truncation errors name the failing byte offset."""
    path = Path(path)
    data = path.read_bytes()

    def take(n: int, offset: int) -> tuple[bytes, int]:
        if offset + n > len(data):
            raise VectorStoreError(
                f"{path}: truncated file, needed {n} bytes at byte offset {offset}, "
                f"have {len(data)}"
            )
        return data[offset:offset + n], offset + n

    chunk, off = take(4, 0)
    if chunk != HLMV_MAGIC:
        raise VectorStoreError(f"{path}: bad magic, expected {HLMV_MAGIC!r}, found {chunk!r}")
    chunk, off = take(8, off)
    version, dim = struct.unpack("<II", chunk)
    if version != HLMV_VERSION:
        raise VectorStoreError(
            f"{path}: unsupported version, expected {HLMV_VERSION}, found {version}"
        )
    chunk, off = take(8, off)
    (count,) = struct.unpack("<Q", chunk)
    ids: list[str] = []
    for _ in range(count):
        chunk, off = take(4, off)
        (id_len,) = struct.unpack("<I", chunk)
        chunk, off = take(id_len, off)
        ids.append(chunk.decode("utf-8"))
    chunk, off = take(count * dim * 4, off)
    matrix = np.frombuffer(chunk, dtype="<f4").reshape(count, dim).copy()
    return VectorStore(ids, matrix)

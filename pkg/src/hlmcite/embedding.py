"""Embedding backends and corpus embedding.

Three backends sit behind one interface: a remote HTTP service, a
precomputed-vector file keyed by paper id, and a deterministic hash-based
mock for tests. Input text is the title and abstract joined by one space,
truncated to the backend's token limit.
"""

from __future__ import annotations

import hashlib
import os
from typing import Sequence

import numpy as np

from .corpus import Corpus, PaperRecord
from .vectors import VectorStore, build_store

DEFAULT_DIM = 768
DEFAULT_MAX_TOKENS = 512


class EmbeddingError(Exception):
    """Backend failure; ``retryable`` signals a transient condition."""

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class EmbeddingBackend:
    """Interface: deterministic text -> fixed-dim float32 vector."""

    name: str = "abstract"
    dim: int = DEFAULT_DIM
    batch_limit: int = 64
    max_tokens: int = DEFAULT_MAX_TOKENS

    def embed_texts(self, texts: Sequence[str], ids: Sequence[str] | None = None) -> np.ndarray:
        raise NotImplementedError


class HashEmbeddingBackend(EmbeddingBackend):
    """Deterministic mock: vectors seeded from a SHA-256 of the input text."""

    def __init__(self, dim: int = DEFAULT_DIM, name: str = "mock-hash"):
        self.name = name
        self.dim = dim

    def embed_texts(self, texts: Sequence[str], ids: Sequence[str] | None = None) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            out[i] = rng.standard_normal(self.dim).astype(np.float32)
        return out


class PrecomputedVectorBackend(EmbeddingBackend):
    """Looks vectors up by paper id in an existing store; text is ignored."""

    def __init__(self, store: VectorStore, name: str = "precomputed"):
        self.name = name
        self.dim = store.dim
        self._store = store

    def embed_texts(self, texts: Sequence[str], ids: Sequence[str] | None = None) -> np.ndarray:
        if ids is None:
            raise EmbeddingError("precomputed backend requires paper ids")
        out = np.empty((len(ids), self.dim), dtype=np.float32)
        for i, pid in enumerate(ids):
            if pid not in self._store:
                raise EmbeddingError(f"no precomputed vector for id {pid!r}")
            out[i] = self._store.vector(pid)
        return out


class HttpEmbeddingBackend(EmbeddingBackend):
    """Remote embedding service speaking the common JSON vector API.

    POSTs ``{model, input: [texts]}`` and reads per-input float arrays;
    request/response field names are configurable to match other providers.
    Base URL and key come from EMBED_API_BASE / EMBED_API_KEY unless given.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "text-embedding-3-small",
        dim: int = DEFAULT_DIM,
        input_field: str = "input",
        data_field: str = "data",
        vector_field: str = "embedding",
        timeout: float = 60.0,
    ):
        self.name = f"http:{model}"
        self.model = model
        self.dim = dim
        self.base_url = (base_url or os.environ.get("EMBED_API_BASE", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("EMBED_API_KEY", "")
        self.input_field = input_field
        self.data_field = data_field
        self.vector_field = vector_field
        self.timeout = timeout
        if not self.base_url:
            raise EmbeddingError("EMBED_API_BASE is not set")

    def embed_texts(self, texts: Sequence[str], ids: Sequence[str] | None = None) -> np.ndarray:
        import requests

        try:
            resp = requests.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model, self.input_field: list(texts)},
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise EmbeddingError(f"embedding request failed: {exc}", retryable=True) from exc
        if resp.status_code in (429, 500, 502, 503, 504):
            raise EmbeddingError(
                f"embedding service returned {resp.status_code}: {resp.text[:200]}",
                retryable=True,
            )
        if resp.status_code != 200:
            raise EmbeddingError(
                f"embedding service returned {resp.status_code}: {resp.text[:200]}"
            )
        payload = resp.json()
        rows = [entry[self.vector_field] for entry in payload[self.data_field]]
        out = np.asarray(rows, dtype=np.float32)
        if out.shape != (len(texts), self.dim):
            raise EmbeddingError(
                f"embedding service returned shape {out.shape}, expected ({len(texts)}, {self.dim})"
            )
        return out


def build_text(paper: PaperRecord, max_tokens: int = DEFAULT_MAX_TOKENS) -> str:
    """Title + single space + abstract, whitespace-token truncated."""
    text = f"{paper.title} {paper.abstract}".strip()
    tokens = text.split()
    if len(tokens) > max_tokens:
        text = " ".join(tokens[:max_tokens])
    return text


def embed_paper(backend: EmbeddingBackend, paper: PaperRecord) -> np.ndarray:
    return backend.embed_texts([build_text(paper, backend.max_tokens)], ids=[paper.id])[0]


def embed_corpus(backend: EmbeddingBackend, corpus: Corpus) -> VectorStore:
    """Embed every record, batched, rows in corpus order."""
    ids = list(corpus.ids)
    rows: list[np.ndarray] = []
    batch = max(1, backend.batch_limit)
    for start in range(0, len(ids), batch):
        chunk = ids[start:start + batch]
        texts = [build_text(corpus[pid], backend.max_tokens) for pid in chunk]
        rows.append(backend.embed_texts(texts, ids=chunk))
    matrix = np.vstack(rows) if rows else np.empty((0, backend.dim), dtype=np.float32)
    return build_store(zip(ids, matrix), dim=backend.dim)

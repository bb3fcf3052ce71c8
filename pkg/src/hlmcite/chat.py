"""Chat-completion backends: HTTP client, response cache, and test mocks.

Every backend takes an OpenAI-style message list and returns the completion
text plus token usage. Usage is backend-reported when available; otherwise
the caller estimates ceil(chars / 4) and flags the numbers as estimated.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

ChatMessage = dict  # {"role": ..., "content": ...}

_TITLE_RE = re.compile(r"Paper (\d+) Title: (.*?) (?:Abstract|Analysis):", re.DOTALL)
_QUERY_TITLE_RE = re.compile(r"query paper\. Title: (.*?) Abstract:", re.DOTALL)


class ChatBackendError(Exception):
    """Raised when a backend exhausts its retries."""


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None

    @property
    def usage_reported(self) -> bool:
        return self.prompt_tokens is not None and self.completion_tokens is not None


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


class ChatBackend:
    """Interface for chat completion; implementations must be deterministic
    at temperature 0 for a fixed model version."""

    model_name: str = "abstract"
    temperature: float = 0.0

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        raise NotImplementedError


class RateLimiter:
    """Global minimum-interval limiter shared across worker threads."""

    def __init__(self, min_interval: float = 0.0):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._last + self.min_interval - now
            if delay > 0:
                time.sleep(delay)
                now = time.monotonic()
            self._last = now


class HttpChatBackend(ChatBackend):
    """OpenAI-compatible chat-completions client.

    Retries up to 5 attempts with exponential backoff and jitter; the caller
    degrades to retrieval order when this still fails. Credentials come from
    CHAT_API_BASE / CHAT_API_KEY / CHAT_MODEL unless passed explicitly.
    """

    MAX_ATTEMPTS = 5

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        temperature: float = 0.0,
        timeout: float = 120.0,
        rate_limiter: RateLimiter | None = None,
    ):
        self.base_url = (base_url or os.environ.get("CHAT_API_BASE", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("CHAT_API_KEY", "")
        self.model_name = model or os.environ.get("CHAT_MODEL", "gpt-4o")
        self.temperature = temperature
        self.timeout = timeout
        self.rate_limiter = rate_limiter or RateLimiter()
        if not self.base_url:
            raise ChatBackendError("CHAT_API_BASE is not set")

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        import requests

        last_error = "no attempt made"
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                time.sleep((2 ** attempt) * 0.5 * (1.0 + random.random()))
            self.rate_limiter.wait()
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json={
                        "model": self.model_name,
                        "temperature": self.temperature,
                        "messages": list(messages),
                    },
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if resp.status_code in (429, 500, 502, 503, 504):
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                continue
            if resp.status_code != 200:
                raise ChatBackendError(f"chat service returned {resp.status_code}: {resp.text[:200]}")
            payload = resp.json()
            usage = payload.get("usage") or {}
            return ChatResponse(
                text=payload["choices"][0]["message"]["content"] or "",
                prompt_tokens=usage.get("prompt_tokens"),
                completion_tokens=usage.get("completion_tokens"),
            )
        raise ChatBackendError(f"chat backend exhausted {self.MAX_ATTEMPTS} attempts: {last_error}")


def _is_decider(messages: Sequence[ChatMessage]) -> bool:
    system = next((m["content"] for m in messages if m["role"] == "system"), "")
    return "cited together" in system


def _last_user(messages: Sequence[ChatMessage]) -> str:
    for msg in reversed(messages):
        if msg["role"] == "user":
            return msg["content"]
    return ""


def _live_block(content: str) -> str:
    # The one-shot exemplar is concatenated before the live request, so only
    # the final "query paper" block describes the actual query.
    matches = list(_QUERY_TITLE_RE.finditer(content))
    return content[matches[-1].start():] if matches else content


def _pool_titles(content: str) -> list[tuple[int, str]]:
    block = _live_block(content)
    seen: dict[int, str] = {}
    for m in _TITLE_RE.finditer(block):
        idx = int(m.group(1))
        if idx not in seen:
            seen[idx] = m.group(2).strip()
    return sorted(seen.items())


class IdentityChatMock(ChatBackend):
    """Echoes the presented order: the reranked output equals retrieval order."""

    model_name = "mock-identity"

    def __init__(self) -> None:
        self.calls = 0

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        self.calls += 1
        content = _last_user(messages)
        pool = _pool_titles(content)
        if _is_decider(messages):
            order = ", ".join(f"paper {idx}" for idx, _ in pool)
            return ChatResponse(text=f"Ranked order: {order}")
        lines = [f"{idx}. Relevance: direct match with the query topic." for idx, _ in pool]
        return ChatResponse(text="\n".join(lines))


class OracleChatMock(ChatBackend):
    """Ranks ground-truth core candidates first; used for upper-bound tests.

    Built from a map of query title -> set of core candidate titles, which is
    all the information visible inside a rendered prompt.
    """

    model_name = "mock-oracle"

    def __init__(self, core_titles_by_query: dict[str, set[str]]):
        self._cores = core_titles_by_query
        self.calls = 0

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        self.calls += 1
        content = _last_user(messages)
        pool = _pool_titles(content)
        if not _is_decider(messages):
            lines = [f"{idx}. Relevance: candidate considered." for idx, _ in pool]
            return ChatResponse(text="\n".join(lines))
        block = _live_block(content)
        qm = _QUERY_TITLE_RE.search(block)
        cores = self._cores.get(qm.group(1).strip() if qm else "", set())
        ranked = sorted(pool, key=lambda item: (item[1] not in cores, item[0]))
        order = ", ".join(f"paper {idx}" for idx, _ in ranked)
        return ChatResponse(text=f"Ranked order: {order}")


class ScriptedChatMock(ChatBackend):
    """Returns canned responses in sequence; fails once exhausted."""

    model_name = "mock-scripted"

    def __init__(self, responses: Sequence[str], fail_after: int | None = None):
        self._responses = list(responses)
        self._fail_after = fail_after
        self.calls = 0

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        if self._fail_after is not None and self.calls >= self._fail_after:
            raise ChatBackendError("scripted backend failure")
        if not self._responses:
            raise ChatBackendError("scripted backend out of responses")
        self.calls += 1
        return ChatResponse(text=self._responses.pop(0))


class FailingChatMock(ChatBackend):
    """Always exhausts retries; exercises the degraded path."""

    model_name = "mock-failing"

    def __init__(self) -> None:
        self.calls = 0

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        self.calls += 1
        raise ChatBackendError("permanent backend failure")


def request_key(model: str, temperature: float, messages: Sequence[ChatMessage]) -> str:
    canonical = json.dumps(
        {"model": model, "temperature": temperature, "messages": list(messages)},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed on-disk cache, one JSON file per request hash."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> ChatResponse | None:
        path = self._path(key)
        if not path.exists():
            return None
        raw = json.loads(path.read_text(encoding="utf-8"))
        return ChatResponse(
            text=raw["text"],
            prompt_tokens=raw.get("prompt_tokens"),
            completion_tokens=raw.get("completion_tokens"),
        )

    def put(self, key: str, response: ChatResponse) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp-{os.getpid()}-{threading.get_ident()}")
        tmp.write_text(json.dumps({
            "text": response.text,
            "prompt_tokens": response.prompt_tokens,
            "completion_tokens": response.completion_tokens,
        }, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)  # atomic; identical keys carry identical values


@dataclass
class CachingChatBackend(ChatBackend):
    """Wraps a backend with the on-disk cache; counts real calls issued."""

    inner: ChatBackend
    cache: ResponseCache
    calls_issued: int = 0
    cache_hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def model_name(self) -> str:  # type: ignore[override]
        return self.inner.model_name

    @property
    def temperature(self) -> float:  # type: ignore[override]
        return self.inner.temperature

    def complete(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        key = request_key(self.inner.model_name, self.inner.temperature, messages)
        cached = self.cache.get(key)
        if cached is not None:
            with self._lock:
                self.cache_hits += 1
            return cached
        response = self.inner.complete(messages)
        self.cache.put(key, response)
        with self._lock:
            self.calls_issued += 1
        return response

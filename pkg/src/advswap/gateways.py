"""Opaque-service clients: victim classifier, LLM chat endpoint, sentence
encoder, and a static word-embedding store.

Every gateway has a deterministic in-process stub so the whole pipeline (and
the test suite) runs with zero network access.
"""

from __future__ import annotations

import hashlib
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import httpx
import numpy as np

from .core import LabelDistribution


class GatewayError(Exception):
    """Transport failure or malformed response from an opaque service."""


class SynonymProviderUnavailable(GatewayError):
    """The synonym source failed persistently; the word is skipped."""


class EncoderUnavailable(GatewayError):
    """The sentence encoder failed; similarity is a hard constraint, so abort."""


def _retrying(
    fn: Callable[[], object],
    *,
    max_retries: int,
    backoff: float,
    sleep: Callable[[float], None],
    retry_on: tuple[type[Exception], ...],
):
    attempt = 0
    while True:
        try:
            return fn()
        except retry_on:
            if attempt >= max_retries:
                raise
            sleep(backoff * (2**attempt))
            attempt += 1


class RateLimiter:
    """Simple requests-per-second limiter, safe for concurrent callers."""

    def __init__(
        self,
        rate_per_second: Optional[float],
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._interval = 1.0 / rate_per_second if rate_per_second else 0.0
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if wait > 0:
            self._sleep(wait)


# ---------------------------------------------------------------------------
# Victim classifier
# ---------------------------------------------------------------------------


class VictimGateway(Protocol):
    num_classes: int
    unk_token: Optional[str]

    def classify_batch(self, texts: Sequence[str]) -> list[LabelDistribution]: ...


def _check_batch(texts: Sequence[str]) -> None:
    if not texts:
        raise ValueError("classify_batch requires a non-empty batch")
    for t in texts:
        if not t or not t.strip():
            raise ValueError("classify_batch received an empty text")


_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:[-'’][A-Za-z0-9]+)*")


class LexiconVictim:
    """Deterministic binary classifier stub: P(positive) is a logistic function
    of summed per-token lexicon weights. Closed-form, so tests can compute
    expected probabilities by hand."""

    def __init__(self, lexicon: dict[str, float], unk_token: str = "[UNK]"):
        self.lexicon = {k.lower(): float(v) for k, v in lexicon.items()}
        self.num_classes = 2
        self.unk_token = unk_token
        self.queries_observed = 0
        self._lock = threading.Lock()

    def score(self, text: str) -> float:
        return sum(
            self.lexicon.get(tok.lower(), 0.0) for tok in _TOKEN_RE.findall(text)
        )

    def distribution(self, text: str) -> LabelDistribution:
        p_pos = 1.0 / (1.0 + math.exp(-self.score(text)))
        return LabelDistribution((1.0 - p_pos, p_pos))

    def classify_batch(self, texts: Sequence[str]) -> list[LabelDistribution]:
        _check_batch(texts)
        with self._lock:
            self.queries_observed += len(texts)
        return [self.distribution(t) for t in texts]


class HttpVictim:
    """Client for a victim served over HTTP.

    Wire contract: POST {base_url}/classify with {"texts": [...]} returns
    {"probabilities": [[...], ...]}; GET {base_url}/metadata returns
    {"num_classes": int, "labels": [...], "unk_token": str|null}.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        batch_size: int = 32,
        max_retries: int = 2,
        backoff: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self._max_retries = max_retries
        self._backoff = backoff
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=self.base_url, timeout=timeout, transport=transport
        )
        meta = self._request_json("GET", "/metadata")
        try:
            self.num_classes = int(meta["num_classes"])
            self.labels = meta.get("labels")
            self.unk_token = meta.get("unk_token")
        except (KeyError, TypeError, ValueError) as exc:
            raise GatewayError(f"malformed victim metadata: {meta!r}") from exc

    def _request_json(self, method: str, path: str, payload: Optional[dict] = None):
        def call():
            resp = self._client.request(method, path, json=payload)
            if resp.status_code >= 500:
                raise httpx.TransportError(f"server error {resp.status_code}")
            if resp.status_code != 200:
                raise GatewayError(f"victim returned {resp.status_code} for {path}")
            return resp.json()

        try:
            return _retrying(
                call,
                max_retries=self._max_retries,
                backoff=self._backoff,
                sleep=self._sleep,
                retry_on=(httpx.TransportError,),
            )
        except httpx.TransportError as exc:
            raise GatewayError(f"victim unreachable after retries: {exc}") from exc

    def classify_batch(self, texts: Sequence[str]) -> list[LabelDistribution]:
        _check_batch(texts)
        out: list[LabelDistribution] = []
        for i in range(0, len(texts), self.batch_size):
            chunk = list(texts[i : i + self.batch_size])
            body = self._request_json("POST", "/classify", {"texts": chunk})
            probs = body.get("probabilities") if isinstance(body, dict) else None
            if not isinstance(probs, list) or len(probs) != len(chunk):
                raise GatewayError(f"malformed classify response: {body!r}")
            for row in probs:
                if len(row) != self.num_classes:
                    raise GatewayError(
                        f"expected {self.num_classes} probabilities, got {len(row)}"
                    )
                out.append(LabelDistribution(tuple(float(p) for p in row)))
        return out

    def close(self) -> None:
        self._client.close()


class CountingVictim:
    """Wrapper that counts per-text queries against any victim gateway."""

    def __init__(self, inner: VictimGateway):
        self.inner = inner
        self.num_classes = inner.num_classes
        self.unk_token = inner.unk_token
        self.queries = 0
        self._lock = threading.Lock()

    def classify_batch(self, texts: Sequence[str]) -> list[LabelDistribution]:
        result = self.inner.classify_batch(texts)
        with self._lock:
            self.queries += len(texts)
        return result


def make_victim_app(victim: VictimGateway):
    """FastAPI app exposing any in-process victim over the HTTP wire contract."""
    from fastapi import Body, FastAPI, HTTPException

    app = FastAPI(title="victim classifier")

    @app.get("/metadata")
    def metadata():
        return {
            "num_classes": victim.num_classes,
            "labels": getattr(victim, "labels", None),
            "unk_token": victim.unk_token,
        }

    @app.post("/classify")
    def classify(payload: dict = Body(...)):
        texts = payload.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise HTTPException(status_code=400, detail="body must carry texts: [str]")
        try:
            dists = victim.classify_batch(texts)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"probabilities": [list(d.probs) for d in dists]}

    return app


# ---------------------------------------------------------------------------
# LLM chat completion
# ---------------------------------------------------------------------------


class LLMGateway(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpChatLLM:
    """Provider-agnostic chat-completion client (OpenAI-style JSON contract).

    Credentials come from the environment (``api_key_env``); temperature
    defaults to 0 for stable outputs.
    """

    def __init__(
        self,
        base_url: str,
        model_name: str,
        temperature: float = 0.0,
        max_retries: int = 3,
        rate_limit: Optional[float] = None,
        timeout: float = 60.0,
        api_key_env: str = "LLM_API_KEY",
        backoff: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.model_name = model_name
        self.temperature = temperature
        self._max_retries = max_retries
        self._backoff = backoff
        self._sleep = sleep
        self._limiter = RateLimiter(rate_limit, sleep=sleep)
        headers = {}
        api_key = os.environ.get(api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            timeout=timeout,
            headers=headers,
            transport=transport,
        )
        self.calls = 0

    def complete(self, prompt: str) -> str:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        self._limiter.acquire()

        def call():
            resp = self._client.post(
                "/chat/completions",
                json={
                    "model": self.model_name,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": self.temperature,
                },
            )
            if resp.status_code >= 500 or resp.status_code == 429:
                raise httpx.TransportError(f"retryable status {resp.status_code}")
            if resp.status_code != 200:
                raise SynonymProviderUnavailable(
                    f"chat endpoint returned {resp.status_code}"
                )
            body = resp.json()
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise SynonymProviderUnavailable(
                    f"malformed completion response: {body!r}"
                ) from exc

        self.calls += 1
        try:
            return _retrying(
                call,
                max_retries=self._max_retries,
                backoff=self._backoff,
                sleep=self._sleep,
                retry_on=(httpx.TransportError,),
            )
        except httpx.TransportError as exc:
            raise SynonymProviderUnavailable(
                f"chat endpoint unreachable after retries: {exc}"
            ) from exc


class StaticLLM:
    """Stub that answers every prompt with one fixed reply."""

    def __init__(self, reply: str):
        self.reply = reply
        self.calls = 0

    def complete(self, prompt: str) -> str:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        self.calls += 1
        return self.reply


class DictionaryLLM:
    """Stub that parses the quoted target word out of the synonym prompt and
    replies with a numbered list from a fixed word -> synonyms mapping."""

    WORD_PATTERN = re.compile(r"the word '([^']+)'")

    def __init__(self, synonyms: dict[str, list[str]]):
        self.synonyms = {k.lower(): list(v) for k, v in synonyms.items()}
        self.calls = 0

    def complete(self, prompt: str) -> str:
        if not prompt or not prompt.strip():
            raise ValueError("prompt must be non-empty")
        self.calls += 1
        match = self.WORD_PATTERN.search(prompt)
        if not match:
            return "I could not find the word."
        entries = self.synonyms.get(match.group(1).lower(), [])
        return "\n".join(f"{i}. {w}" for i, w in enumerate(entries, 1))


class FlakyLLM:
    """Fault-injection wrapper: fails ``failures`` times, then delegates."""

    def __init__(self, inner: LLMGateway, failures: int):
        self.inner = inner
        self.remaining_failures = failures
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        if self.remaining_failures > 0:
            self.remaining_failures -= 1
            raise SynonymProviderUnavailable("injected transient failure")
        return self.inner.complete(prompt)


class RetryingLLM:
    """Retry shim for in-process gateways (HTTP clients retry internally)."""

    def __init__(
        self,
        inner: LLMGateway,
        max_retries: int = 3,
        backoff: float = 0.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.inner = inner
        self._max_retries = max_retries
        self._backoff = backoff
        self._sleep = sleep

    def complete(self, prompt: str) -> str:
        return _retrying(
            lambda: self.inner.complete(prompt),
            max_retries=self._max_retries,
            backoff=self._backoff,
            sleep=self._sleep,
            retry_on=(SynonymProviderUnavailable,),
        )


# ---------------------------------------------------------------------------
# Sentence encoder
# ---------------------------------------------------------------------------


class SentenceEncoderGateway(Protocol):
    def similarity(self, a: str, b: str) -> float: ...


class HashingSentenceEncoder:
    """Deterministic stub encoder: feature-hashed bag of lowercased tokens,
    compared by cosine. One substitution in a text of n distinct tokens scores
    about (n-1)/n, which makes thresholds easy to reason about in tests."""

    def token_counts(self, text: str) -> dict[int, int]:
        counts: dict[int, int] = {}
        for tok in _TOKEN_RE.findall(text.lower()):
            digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
            key = int.from_bytes(digest, "big") % (1 << 20)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def similarity(self, a: str, b: str) -> float:
        if not a or not b:
            raise ValueError("similarity requires non-empty texts")
        va, vb = self.token_counts(a), self.token_counts(b)
        if not va and not vb:
            return 1.0
        if not va or not vb:
            return 0.0
        dot = sum(c * vb.get(k, 0) for k, c in va.items())
        na = math.sqrt(sum(c * c for c in va.values()))
        nb = math.sqrt(sum(c * c for c in vb.values()))
        return dot / (na * nb)


class FailingEncoder:
    """Stub that simulates an unavailable encoder (hard-constraint abort path)."""

    def similarity(self, a: str, b: str) -> float:
        raise EncoderUnavailable("encoder offline")


class TransformerEncoder:
    """Sentence-transformers adapter; optional, needs the model available locally."""

    def __init__(self, model_name_or_path: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderUnavailable("sentence-transformers is not installed") from exc
        try:
            self._model = SentenceTransformer(model_name_or_path)
        except Exception as exc:
            raise EncoderUnavailable(f"cannot load encoder model: {exc}") from exc

    def similarity(self, a: str, b: str) -> float:
        if not a or not b:
            raise ValueError("similarity requires non-empty texts")
        try:
            vecs = self._model.encode([a, b], normalize_embeddings=True)
        except Exception as exc:
            raise EncoderUnavailable(f"encoder call failed: {exc}") from exc
        return float(np.dot(vecs[0], vecs[1]))


# ---------------------------------------------------------------------------
# Word-embedding store
# ---------------------------------------------------------------------------


class EmbeddingStore:
    """Static word -> vector table with cosine similarity and top-k neighbors.

    Out-of-vocabulary lookups return None, never a zero vector.
    """

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise ValueError("embedding store must not be empty")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector shapes: {dims}")
        self.dimensionality = next(iter(dims))[0]
        self._words = sorted(vectors)
        self._index = {w: i for i, w in enumerate(self._words)}
        matrix = np.stack([np.asarray(vectors[w], dtype=np.float64) for w in self._words])
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero vector in embedding store")
        self._unit = matrix / norms

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingStore":
        """Read a whitespace-delimited `word v1 v2 ... vd` text file; a leading
        two-integer line (word2vec header) is skipped."""
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                word, values = parts[0], parts[1:]
                if not values:
                    raise ValueError(f"{path}:{lineno}: no vector components")
                vectors[word] = np.array([float(v) for v in values])
        return cls(vectors)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self._words)

    def vector(self, word: str) -> Optional[np.ndarray]:
        idx = self._index.get(word)
        return None if idx is None else self._unit[idx]

    def word_similarity(self, w1: str, w2: str) -> Optional[float]:
        """Cosine similarity, or None when either word is missing."""
        v1, v2 = self.vector(w1), self.vector(w2)
        if v1 is None or v2 is None:
            return None
        return float(np.dot(v1, v2))

    def nearest(self, word: str, k: int) -> list[tuple[str, float]]:
        """Top-k in-vocabulary neighbors by cosine, excluding the word itself;
        ties break lexicographically for determinism."""
        if k < 1:
            raise ValueError("k must be positive")
        v = self.vector(word)
        if v is None:
            return []
        sims = self._unit @ v
        order = sorted(
            (i for i in range(len(self._words)) if self._words[i] != word),
            key=lambda i: (-sims[i], self._words[i]),
        )
        return [(self._words[i], float(sims[i])) for i in order[:k]]


# ---------------------------------------------------------------------------
# Fill-mask service (for the masked-LM substitution provider)
# ---------------------------------------------------------------------------


class FillMaskGateway(Protocol):
    mask_token: str

    def predict(self, masked_text: str, k: int) -> list[str]: ...


class StubFillMask:
    """Deterministic fill-mask stub: fixed ranking, optionally keyed by the
    exact masked sentence."""

    def __init__(
        self,
        default: Sequence[str] = (),
        by_sentence: Optional[dict[str, Sequence[str]]] = None,
        mask_token: str = "[MASK]",
    ):
        self.default = list(default)
        self.by_sentence = {k: list(v) for k, v in (by_sentence or {}).items()}
        self.mask_token = mask_token

    def predict(self, masked_text: str, k: int) -> list[str]:
        ranking = self.by_sentence.get(masked_text, self.default)
        return list(ranking[:k])


class HttpFillMask:
    """Client for a fill-mask service: POST /fill_mask {"text","top_k"} ->
    {"words": [...]}; GET /metadata supplies the service's mask token."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_retries: int = 2,
        backoff: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), timeout=timeout, transport=transport
        )
        self._max_retries = max_retries
        self._backoff = backoff
        self._sleep = sleep
        meta = self._request("GET", "/metadata")
        self.mask_token = meta.get("mask_token", "[MASK]")

    def _request(self, method: str, path: str, payload: Optional[dict] = None):
        def call():
            resp = self._client.request(method, path, json=payload)
            if resp.status_code >= 500:
                raise httpx.TransportError(f"server error {resp.status_code}")
            if resp.status_code != 200:
                raise GatewayError(f"fill-mask service returned {resp.status_code}")
            return resp.json()

        try:
            return _retrying(
                call,
                max_retries=self._max_retries,
                backoff=self._backoff,
                sleep=self._sleep,
                retry_on=(httpx.TransportError,),
            )
        except httpx.TransportError as exc:
            raise GatewayError(f"fill-mask service unreachable: {exc}") from exc

    def predict(self, masked_text: str, k: int) -> list[str]:
        body = self._request("POST", "/fill_mask", {"text": masked_text, "top_k": k})
        words = body.get("words") if isinstance(body, dict) else None
        if not isinstance(words, list):
            raise GatewayError(f"malformed fill-mask response: {body!r}")
        return [str(w) for w in words[:k]]


@dataclass
class GatewaySet:
    """The bundle of opaque services one attack run talks to."""

    victim: VictimGateway
    encoder: SentenceEncoderGateway
    llm: Optional[LLMGateway] = None
    embeddings: Optional[EmbeddingStore] = None
    fill_mask: Optional[FillMaskGateway] = None

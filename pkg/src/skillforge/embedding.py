"""Embedding providers (remote service, deterministic hashing) and similarity utilities.

Every provider returns unit-norm float32 rows. Vectors are plain numpy arrays.
"""
from __future__ import annotations

import hashlib
import logging
import math
import operator
import sqlite3
import threading
import time
from functools import lru_cache
from typing import Sequence

import httpx
import numpy as np

from .config import ConfigError, EmbeddingProviderConfig
from .text import tokenize

log = logging.getLogger("skillforge.embedding")


class EmbeddingProviderError(RuntimeError):
    def __init__(self, message: str, batch_indices: Sequence[int]):
        super().__init__(message)
        self.batch_indices = list(batch_indices)


def l2_normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0 or not math.isfinite(norm):
        out = np.zeros_like(v)
        out[0] = 1.0
        return out.astype(np.float32)
    return (v / norm).astype(np.float32)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, correctly rounded.

    float32 x float32 products are exact in float64 and ``math.fsum`` rounds the
    sum once, so the result does not depend on summation order or platform.
    """
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    return math.fsum(map(operator.mul, np.asarray(a, dtype=np.float64).tolist(),
                         np.asarray(b, dtype=np.float64).tolist()))


def similarities(q: np.ndarray, matrix: np.ndarray) -> list[float]:
    """:func:`cosine_similarity` of ``q`` against every row."""
    qs = np.asarray(q, dtype=np.float64).tolist()
    return [math.fsum(map(operator.mul, qs, row)) for row in np.asarray(matrix, dtype=np.float64).tolist()]


@lru_cache(maxsize=200_000)
def _bucket(feature: str, dim: int) -> tuple[int, float]:
    h = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    n = int.from_bytes(h, "little")
    return n % dim, (1.0 if (n >> 63) & 1 else -1.0)


def deterministic_embed(text: str, dim: int) -> np.ndarray:
    """Signed feature hashing of token unigrams and bigrams, L2-normalized."""
    if dim < 8:
        raise ValueError("dim must be >= 8")
    toks = tokenize(text)
    if not toks:
        log.warning("empty token set; returning the zero-information vector")
        v = np.zeros(dim, dtype=np.float32)
        v[0] = 1.0
        return v
    acc = np.zeros(dim, dtype=np.float64)
    feats = [f"u:{t}" for t in toks] + [f"b:{a} {b}" for a, b in zip(toks, toks[1:])]
    for feat in feats:
        idx, sign = _bucket(feat, dim)
        acc[idx] += sign
    return l2_normalize(acc)


class Embedder:
    """Base provider: subclasses implement ``_embed_batch``."""

    provider = "base"

    def __init__(self, cfg: EmbeddingProviderConfig):
        self.cfg = cfg

    @property
    def fingerprint(self) -> str:
        return f"{self.provider}:{self.cfg.model_name}:{self.cfg.dim}"

    def _embed_batch(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.cfg.dim), dtype=np.float32)
        out = self._embed_batch(texts)
        if out.shape != (len(texts), self.cfg.dim):
            raise ConfigError(f"embedding dim mismatch: got {out.shape[-1]}, configured {self.cfg.dim}")
        return out

    def embed_query(self, text: str) -> np.ndarray:
        return self.embed([self.cfg.query_prefix + text])[0]


class DeterministicEmbedder(Embedder):
    provider = "deterministic"

    def _embed_batch(self, texts):
        return np.stack([deterministic_embed(t, self.cfg.dim) for t in texts])


class RemoteEmbedder(Embedder):
    """JSON-over-HTTP client: POST ``{"model", "inputs"}`` -> ``{"embeddings"}``."""

    provider = "remote"

    def __init__(self, cfg: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None):
        super().__init__(cfg)
        self._client = httpx.Client(timeout=cfg.timeout_ms / 1000.0, transport=transport)

    def _post(self, batch: list[str], indices: list[int]) -> np.ndarray:
        last: Exception | None = None
        for attempt in range(self.cfg.max_attempts):
            if attempt:
                time.sleep(self.cfg.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.cfg.endpoint_url,
                                         json={"model": self.cfg.model_name, "inputs": batch})
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = RuntimeError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise EmbeddingProviderError(f"embedding service rejected batch: HTTP {resp.status_code}", indices)
            try:
                rows = resp.json()["embeddings"]
                arr = np.asarray(rows, dtype=np.float64)
            except (ValueError, KeyError, TypeError) as exc:
                raise EmbeddingProviderError(f"malformed embedding response: {exc}", indices) from exc
            if arr.ndim != 2 or arr.shape[0] != len(batch):
                raise EmbeddingProviderError("embedding response has wrong row count", indices)
            if arr.shape[1] != self.cfg.dim:
                raise ConfigError(f"embedding dim mismatch: got {arr.shape[1]}, configured {self.cfg.dim}")
            return np.stack([l2_normalize(r) for r in arr])
        raise EmbeddingProviderError(
            f"embedding service unreachable after {self.cfg.max_attempts} attempts: {last}", indices)

    def _embed_batch(self, texts):
        rows = []
        bs = self.cfg.batch_size
        for start in range(0, len(texts), bs):
            batch = texts[start:start + bs]
            rows.append(self._post(batch, list(range(start, start + len(batch)))))
        return np.concatenate(rows)


class CachedEmbedder(Embedder):
    """Wraps a provider with a sqlite cache keyed by (provider, model, sha256(text))."""

    def __init__(self, inner: Embedder, path: str):
        super().__init__(inner.cfg)
        self.inner = inner
        self.provider = inner.provider
        self.path = path
        self._write_lock = threading.Lock()
        with sqlite3.connect(path) as con:
            con.execute("CREATE TABLE IF NOT EXISTS emb (provider TEXT, model TEXT, key TEXT, vec BLOB,"
                        " PRIMARY KEY (provider, model, key))")

    def _key(self, text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _embed_batch(self, texts):
        keys = [self._key(t) for t in texts]
        found: dict[str, np.ndarray] = {}
        with sqlite3.connect(self.path) as con:
            for k in set(keys):
                row = con.execute("SELECT vec FROM emb WHERE provider=? AND model=? AND key=?",
                                  (self.provider, self.cfg.model_name, k)).fetchone()
                if row is not None:
                    vec = np.frombuffer(row[0], dtype="<f4")
                    if vec.shape[0] == self.cfg.dim:
                        found[k] = vec
        missing = [i for i, k in enumerate(keys) if k not in found]
        if missing:
            uniq = list(dict.fromkeys(texts[i] for i in missing))
            fresh = self.inner.embed(uniq)
            with self._write_lock, sqlite3.connect(self.path) as con:
                for text, vec in zip(uniq, fresh):
                    k = self._key(text)
                    found[k] = vec
                    con.execute("INSERT OR REPLACE INTO emb VALUES (?,?,?,?)",
                                (self.provider, self.cfg.model_name, k, vec.astype("<f4").tobytes()))
        return np.stack([np.asarray(found[k], dtype=np.float32) for k in keys])


def make_embedder(cfg: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None) -> Embedder:
    cfg.validate()
    inner: Embedder
    if cfg.provider == "remote":
        inner = RemoteEmbedder(cfg, transport=transport)
    else:
        inner = DeterministicEmbedder(cfg)
    if cfg.cache_path:
        return CachedEmbedder(inner, cfg.cache_path)
    return inner


def embed_texts(texts: Sequence[str], cfg: EmbeddingProviderConfig) -> np.ndarray:
    if any(not t for t in texts):
        raise ValueError("texts must be non-empty strings")
    return make_embedder(cfg).embed(texts)

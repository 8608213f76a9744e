"""Text embedding providers used for nearest-concept retrieval.

Every provider returns L2-normalized float64 vectors of a fixed dimension.
"""
from __future__ import annotations

import json
import zlib
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from ..errors import ProviderError


@runtime_checkable
class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def embed_many(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    batch = getattr(provider, "embed_many", None)
    if batch is not None:
        return np.asarray(batch(list(texts)), dtype=np.float64).reshape(len(texts), provider.dim)
    if not texts:
        return np.zeros((0, provider.dim))
    return np.stack([provider.embed(t) for t in texts])


def _unit(vec: np.ndarray, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm == 0.0:
        raise ProviderError(f"cannot normalize embedding for {what!r}")
    return vec / norm


class HashingProvider:
    """Deterministic stub: signed hashed character trigrams, L2-normalized."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    @property
    def provider_id(self) -> str:
        return f"hashing-{self.dim}"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        padded = f"  {text.strip().lower()} "
        for i in range(len(padded) - 2):
            h = zlib.crc32(padded[i:i + 3].encode("utf-8"))
            vec[h % self.dim] += 1.0 if (h >> 16) & 1 else -1.0
        if not vec.any():
            vec[0] = 1.0
        return _unit(vec, text)


class TableProvider:
    """Looks vectors up in a JSON Lines table ``{"name": ..., "vector": [...]}``."""

    def __init__(self, table: dict[str, Sequence[float]]):
        if not table:
            raise ProviderError("empty embedding table")
        self._table = {k.strip().lower(): _unit(v, k) for k, v in table.items()}
        dims = {v.shape[0] for v in self._table.values()}
        if len(dims) != 1:
            raise ProviderError(f"inconsistent vector dimensions in table: {sorted(dims)}")
        self.dim = dims.pop()

    @classmethod
    def from_file(cls, path) -> "TableProvider":
        table = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    table[obj["name"]] = obj["vector"]
                except (ValueError, KeyError) as exc:
                    raise ProviderError(f"{path}:{lineno}: malformed table line ({exc})") from exc
        return cls(table)

    @property
    def provider_id(self) -> str:
        return f"table-{len(self._table)}-{self.dim}"

    def embed(self, text: str) -> np.ndarray:
        try:
            return self._table[text.strip().lower()].copy()
        except KeyError:
            raise ProviderError(f"no vector for {text!r} in embedding table") from None


class HttpProvider:
    """Client for a service answering ``POST {"texts": [...]}`` with ``{"vectors": [[...], ...]}``."""

    def __init__(self, url: str, dim: int | None = None, timeout: float = 10.0, client: httpx.Client | None = None):
        self.url = url
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)
        self.dim = dim if dim is not None else self.embed_many(["dimension probe"]).shape[1]

    @property
    def provider_id(self) -> str:
        return f"http-{self.url}"

    def embed_many(self, texts: list[str]) -> np.ndarray:
        try:
            resp = self._client.post(self.url, json={"texts": texts}, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise ProviderError(f"embedding request to {self.url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"embedding service returned HTTP {resp.status_code}")
        try:
            vectors = resp.json()["vectors"]
        except (ValueError, KeyError) as exc:
            raise ProviderError("embedding service sent a malformed body") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"expected {len(texts)} vectors, got {len(vectors)}")
        if not texts:
            return np.zeros((0, getattr(self, "dim", 0)))
        return np.stack([_unit(v, t) for v, t in zip(vectors, texts)])

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]


def provider_from_spec(spec: str, dim: int = 64) -> EmbeddingProvider:
    """``stub`` | ``file:PATH`` | ``http:URL``"""
    if spec == "stub":
        return HashingProvider(dim)
    if spec.startswith("file:"):
        return TableProvider.from_file(spec[len("file:"):])
    if spec.startswith("http:"):
        url = spec[len("http:"):]
        return HttpProvider(url if "://" in url else "http:" + url)
    raise ValueError(f"unknown embedding provider {spec!r}")

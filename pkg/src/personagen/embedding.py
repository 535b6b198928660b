"""Text embedding providers and the labeled corpus every metric works on."""

from __future__ import annotations

import hashlib
import time
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import httpx
import numpy as np

from ._http import auth_headers, post_json
from .errors import BackendUnavailable, DimensionMismatch
from .llm.gateway import map_bounded


class DegenerateVectorWarning(UserWarning):
    pass


class EmbeddingProvider(Protocol):
    tag: str

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class MockEmbeddingProvider:
    """Seeded hash of the text mapped to a pseudorandom unit vector.

    Distinct texts land on nearly orthogonal directions; identical texts
    always produce identical vectors, in any process.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.tag = f"mock:dim={dim}:seed={seed}"

    def vector(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode("utf-8")).digest()
        gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
        v = gen.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self.vector(t).tolist() for t in texts]


class RemoteEmbeddingProvider:
    """Client for an OpenAI-style ``/embeddings`` endpoint.

    Requests carry ``{"model": ..., "input": [texts]}``; the response may be
    either ``{"data": [{"index": i, "embedding": [...]}, ...]}`` or a bare
    ``{"embeddings": [[...], ...]}`` list.
    """

    def __init__(
        self,
        model: str,
        base_url: str = "https://api.openai.com/v1",
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        batch_size: int = 64,
        max_in_flight: int = 8,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.model = model
        self.url = base_url.rstrip("/") + "/embeddings"
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff = backoff
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.tag = f"remote:{model}"
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def _embed_chunk(self, chunk: Sequence[str]) -> list[list[float]]:
        data = post_json(
            self._client,
            self.url,
            {"model": self.model, "input": list(chunk)},
            auth_headers(self.api_key_env),
            max_retries=self.max_retries,
            backoff=self.backoff,
            sleep=self._sleep,
        )
        return _parse_embeddings(data, len(chunk))

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        chunks = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        out: list[list[float]] = []
        for part in map_bounded(self._embed_chunk, chunks, self.max_in_flight):
            out.extend(part)
        return out


def _parse_embeddings(data: Any, expected: int) -> list[list[float]]:
    try:
        if isinstance(data, Mapping) and "data" in data:
            items = sorted(data["data"], key=lambda d: d.get("index", 0))
            vectors = [list(map(float, d["embedding"])) for d in items]
        elif isinstance(data, Mapping) and "embeddings" in data:
            vectors = [list(map(float, v)) for v in data["embeddings"]]
        else:
            vectors = [list(map(float, v)) for v in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise BackendUnavailable(f"malformed embeddings response: {exc!r}") from exc
    if len(vectors) != expected:
        raise BackendUnavailable(f"expected {expected} embeddings, got {len(vectors)}")
    return vectors


def embed_batch(texts: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    """Embed ``texts`` in order; returns an ``(n, dim)`` float array."""
    texts = list(texts)
    if not texts:
        return np.empty((0, getattr(provider, "dim", 0)))
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise ValueError(f"text {i} is empty")
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise DimensionMismatch(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"provider returned vectors of lengths {sorted(dims)}")
    out = np.asarray(vectors, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError("provider returned non-finite values")
    return out


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm.

    The zero vector is returned unchanged with a DegenerateVectorWarning.
    """
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        warnings.warn("cannot normalize a zero vector", DegenerateVectorWarning, stacklevel=2)
        return v.copy()
    return v / norm


def l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    zero = norms[:, 0] == 0
    if zero.any():
        warnings.warn(
            f"{int(zero.sum())} zero vector(s) left unnormalized", DegenerateVectorWarning, stacklevel=2
        )
        norms[zero] = 1.0
    return x / norms


@dataclass
class EmbeddedCorpus:
    sample_ids: list[str]
    labels: list[str]
    vectors: np.ndarray
    provider_tag: str

    def __post_init__(self) -> None:
        self.sample_ids = [str(s) for s in self.sample_ids]
        self.labels = [str(lbl) for lbl in self.labels]
        self.vectors = np.asarray(self.vectors, dtype=float)
        n = len(self.sample_ids)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != n or len(self.labels) != n:
            raise DimensionMismatch(
                f"{n} ids, {len(self.labels)} labels and vectors of shape {self.vectors.shape}"
            )
        if n and self.vectors.shape[1] < 1:
            raise DimensionMismatch("vectors have zero dimension")
        if len(set(self.sample_ids)) != n:
            raise ValueError("sample ids are not unique")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("corpus contains non-finite values")

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def label_set(self) -> list[str]:
        """Labels in order of first appearance."""
        return list(dict.fromkeys(self.labels))

    def vectors_for(self, label: str) -> np.ndarray:
        idx = [i for i, lbl in enumerate(self.labels) if lbl == label]
        return self.vectors[idx]

    def subset(self, indices: Iterable[int]) -> "EmbeddedCorpus":
        idx = list(indices)
        return EmbeddedCorpus(
            [self.sample_ids[i] for i in idx],
            [self.labels[i] for i in idx],
            self.vectors[idx].reshape(len(idx), self.vectors.shape[1]),
            self.provider_tag,
        )

    def with_labels(self, labels: Sequence[str]) -> "EmbeddedCorpus":
        return EmbeddedCorpus(list(self.sample_ids), list(labels), self.vectors.copy(), self.provider_tag)

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {
                "kind": "embedding",
                "sample_id": sid,
                "label": lbl,
                "provider_tag": self.provider_tag,
                "dim": self.dim,
                "vector": vec.tolist(),
            }
            for sid, lbl, vec in zip(self.sample_ids, self.labels, self.vectors)
        ]

    @classmethod
    def from_records(cls, records: Sequence[Mapping[str, Any]]) -> "EmbeddedCorpus":
        if not records:
            raise ValueError("no embedding records")
        tags = {r["provider_tag"] for r in records}
        if len(tags) != 1:
            raise ValueError(f"records mix provider tags {sorted(tags)}")
        dims = {len(r["vector"]) for r in records}
        if len(dims) != 1:
            raise DimensionMismatch(f"records mix vector lengths {sorted(dims)}")
        return cls(
            [r["sample_id"] for r in records],
            [r["label"] for r in records],
            np.array([r["vector"] for r in records], dtype=float),
            tags.pop(),
        )


def embed_corpus(
    ids: Sequence[str], texts: Sequence[str], labels: Sequence[str], provider: EmbeddingProvider
) -> EmbeddedCorpus:
    return EmbeddedCorpus(list(ids), list(labels), embed_batch(texts, provider), provider.tag)

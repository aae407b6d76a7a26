"""Text normalization, hashed trigram embeddings, mean pooling, cosine similarity.

The built-in provider is a context-free feature hasher: every token is padded
with ``#``, split into character trigrams, and each trigram adds +1 or -1 to
one component chosen by its FNV-1a 64-bit hash. Token vectors are unit length;
sentence vectors are the plain mean of their token vectors.

All vector math is float64.
"""

from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence, Union, runtime_checkable

import numpy as np

from medagi.errors import (
    DegenerateEmbedding,
    DimensionMismatch,
    EmptyInput,
    ProviderFailure,
    ZeroVector,
)

DEFAULT_DIMENSION = 256

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise EmptyInput("token sequence is empty")
        for tok in self.tokens:
            if not tok or tok != tok.lower() or any(ch.isspace() for ch in tok):
                raise ValueError(f"invalid token {tok!r}")

    @property
    def length(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True)
class TokenEmbeddings:
    vectors: np.ndarray  # shape (length, dimension)
    provider_fingerprint: str = ""

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


@dataclass(frozen=True, eq=False)
class SentenceEmbedding:
    values: np.ndarray
    provider_fingerprint: str = ""

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other):
        if not isinstance(other, SentenceEmbedding):
            return NotImplemented
        return (
            self.provider_fingerprint == other.provider_fingerprint
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    def __hash__(self):
        return hash((self.provider_fingerprint, self.values.tobytes()))


@runtime_checkable
class EmbeddingProvider(Protocol):
    """What the router needs from an encoder.

    ``embed`` returns one vector per token. ``thread_safe`` tells the gateway
    whether it may call the provider concurrently or must serialize calls.
    """

    id: str
    dimension: int
    thread_safe: bool

    @property
    def config_hash(self) -> str: ...

    @property
    def fingerprint(self) -> str: ...

    def embed(self, tokens: Sequence[str]) -> Sequence[Sequence[float]]: ...


def normalize_text(text: str) -> TokenSequence:
    """Lowercase, split on whitespace, strip non-alphanumeric edges, drop empties.

    >>> normalize_text("Skin rash?").tokens
    ('skin', 'rash')
    """
    tokens = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and not raw[start].isalnum():
            start += 1
        while end > start and not raw[end - 1].isalnum():
            end -= 1
        if start < end:
            tokens.append(raw[start:end])
    if not tokens:
        raise EmptyInput("no tokens survive normalization")
    return TokenSequence(tuple(tokens))


def fnv1a_64(data: bytes) -> int:
    h = _FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV64_PRIME) & _MASK64
    return h


@functools.lru_cache(maxsize=65536)
def _hashed_token(token: str, dimension: int) -> tuple[float, ...]:
    padded = f"#{token}#"
    acc = [0.0] * dimension
    for i in range(len(padded) - 2):
        h = fnv1a_64(padded[i : i + 3].encode("utf-8"))
        acc[h % dimension] += -1.0 if h >> 63 else 1.0
    vec = np.asarray(acc, dtype=np.float64)
    norm = float(np.sqrt(np.dot(vec, vec)))
    if norm != 0.0:
        vec = vec / norm
    return tuple(vec.tolist())


def hash_embed_token(token: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Signed trigram feature hash of one token, L2-normalized.

    Returns the all-zero vector when every trigram cancels; pooling deals with it.
    """
    if not token or token != token.lower() or any(ch.isspace() for ch in token):
        raise ValueError(f"invalid token {token!r}")
    if dimension < 2:
        raise ValueError("dimension must be >= 2")
    return np.array(_hashed_token(token, dimension), dtype=np.float64)


@dataclass
class HashingProvider:
    """Deterministic reference provider; safe to share across threads."""

    dimension: int = DEFAULT_DIMENSION
    id: str = "hash-trigram-fnv1a64"
    thread_safe: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")

    @property
    def config_hash(self) -> str:
        settings = {
            "id": self.id,
            "dimension": self.dimension,
            "ngram": 3,
            "pad": "#",
            "hash": "fnv1a64",
            "signed": True,
        }
        blob = json.dumps(settings, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def fingerprint(self) -> str:
        return f"{self.id}/{self.config_hash}"

    def embed(self, tokens: Sequence[str]) -> list[np.ndarray]:
        return [hash_embed_token(tok, self.dimension) for tok in tokens]


def embed_tokens(tokens: TokenSequence, provider: EmbeddingProvider) -> TokenEmbeddings:
    try:
        raw = provider.embed(list(tokens.tokens))
    except ProviderFailure:
        raise
    except Exception as exc:
        raise ProviderFailure(f"provider {provider.id!r} failed: {exc}") from exc
    if len(raw) != len(tokens):
        raise ProviderFailure(
            f"provider {provider.id!r} returned {len(raw)} vectors for {len(tokens)} tokens"
        )
    try:
        vectors = np.array([np.asarray(v, dtype=np.float64) for v in raw], dtype=np.float64)
    except ValueError as exc:
        raise ProviderFailure(f"provider {provider.id!r} returned ragged vectors") from exc
    if vectors.ndim != 2 or vectors.shape[1] != provider.dimension:
        got = vectors.shape[1] if vectors.ndim == 2 else "ragged"
        raise ProviderFailure(
            f"provider {provider.id!r} declares dimension {provider.dimension} but returned {got}"
        )
    if not np.all(np.isfinite(vectors)):
        raise ProviderFailure(f"provider {provider.id!r} returned non-finite components")
    vectors.setflags(write=False)
    return TokenEmbeddings(vectors, provider.fingerprint)


def mean_pool(embeddings: TokenEmbeddings | Sequence[Sequence[float]], fingerprint: str = "") -> SentenceEmbedding:
    if isinstance(embeddings, TokenEmbeddings):
        vectors = embeddings.vectors
        fingerprint = fingerprint or embeddings.provider_fingerprint
    else:
        vectors = np.asarray(embeddings, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise EmptyInput("nothing to pool")
    # fixed left-to-right accumulation so results do not depend on numpy's reduction order
    acc = np.zeros(vectors.shape[1], dtype=np.float64)
    for row in vectors:
        acc += row
    pooled = acc / vectors.shape[0]
    if not np.any(pooled):
        raise DegenerateEmbedding("pooled embedding is all-zero")
    return SentenceEmbedding(pooled, fingerprint)


Vector = Union[SentenceEmbedding, np.ndarray, Sequence[float]]


def _values(v: Vector) -> np.ndarray:
    if isinstance(v, SentenceEmbedding):
        return v.values
    return np.asarray(v, dtype=np.float64)


def cosine_similarity(u: Vector, v: Vector) -> float:
    a, b = _values(u), _values(v)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape} vs {b.shape}")
    na = float(np.sqrt(np.dot(a, a)))
    nb = float(np.sqrt(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    # dot(a, b) and dot(b, a) are the same reduction, so symmetry is exact
    s = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, s))


def embed_text(text: str, provider: EmbeddingProvider) -> SentenceEmbedding:
    return mean_pool(embed_tokens(normalize_text(text), provider))

"""Score every registered expert against a question and pick the argmax."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from medagi.embedding import (
    EmbeddingProvider,
    SentenceEmbedding,
    cosine_similarity,
    embed_tokens,
    mean_pool,
    normalize_text,
)
from medagi.errors import EmptyRegistry, FingerprintMismatch
from medagi.registry import RegistrySnapshot


@dataclass(frozen=True)
class SelectionConfig:
    threshold: Optional[float] = None  # None disables the confidence gate
    top_k: int = 3

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.threshold is not None and not -1.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [-1, 1]")


@dataclass(frozen=True)
class SimilarityRanking:
    entries: tuple[tuple[str, float], ...]
    query_version: int

    def order(self) -> list[str]:
        return [eid for eid, _ in self.entries]

    def top(self, k: int) -> "SimilarityRanking":
        return SimilarityRanking(self.entries[:k], self.query_version)

    def to_list(self) -> list[dict[str, Any]]:
        return [{"expert_id": eid, "score": s} for eid, s in self.entries]


@dataclass(frozen=True)
class RouteDecision:
    selected: str
    score: float
    ranking: SimilarityRanking
    margin: float
    confident: bool = field(default=True)

    def truncated(self, top_k: int) -> "RouteDecision":
        return RouteDecision(self.selected, self.score, self.ranking.top(top_k), self.margin, self.confident)

    def to_dict(self) -> dict[str, Any]:
        return {
            "selected": self.selected,
            "score": self.score,
            "margin": self.margin,
            "confident": self.confident,
            "registry_version": self.ranking.query_version,
            "ranking": self.ranking.to_list(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def embed_query(question: str, provider: EmbeddingProvider) -> SentenceEmbedding:
    return mean_pool(embed_tokens(normalize_text(question), provider))


TIE_DIGITS = 12


def score_all(query: SentenceEmbedding, snapshot: RegistrySnapshot) -> SimilarityRanking:
    if len(snapshot) == 0:
        raise EmptyRegistry()
    fp = snapshot.index.provider_fingerprint
    if query.provider_fingerprint != fp:
        raise FingerprintMismatch(
            f"query embedded by {query.provider_fingerprint!r}, index built by {fp!r}"
        )
    scored = []
    for eid, emb in snapshot.index.entries.items():
        s = cosine_similarity(query, emb)
        if not math.isfinite(s):
            raise FingerprintMismatch(f"non-finite score for {eid!r}")
        scored.append((eid, s))
    # scores equal up to rounding noise count as ties so the id tie-break
    # is stable under query rescaling
    scored.sort(key=lambda p: (-round(p[1], TIE_DIGITS), p[0]))
    return SimilarityRanking(tuple(scored), snapshot.version)


def decide(ranking: SimilarityRanking, config: SelectionConfig) -> RouteDecision:
    (best_id, best), *rest = ranking.entries
    margin = best - rest[0][1] if rest else 0.0
    confident = config.threshold is None or best >= config.threshold
    return RouteDecision(best_id, best, ranking, margin, confident)


def select(
    question: str,
    snapshot: RegistrySnapshot,
    config: SelectionConfig,
    provider: EmbeddingProvider,
) -> RouteDecision:
    if len(snapshot) == 0:
        raise EmptyRegistry()
    return decide(score_all(embed_query(question, provider), snapshot), config)

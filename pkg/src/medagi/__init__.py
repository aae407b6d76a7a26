"""Embedding-based router that sends each question to the best-matching domain expert."""

from medagi.backbone import ComponentSpec, ResourceLedger, SavingsReport
from medagi.embedding import (
    HashingProvider,
    SentenceEmbedding,
    cosine_similarity,
    embed_tokens,
    hash_embed_token,
    mean_pool,
    normalize_text,
)
from medagi.registry import ExpertDescriptor, Registry, RegistrySnapshot, load_registry, save_registry
from medagi.selection import RouteDecision, SelectionConfig, SimilarityRanking, embed_query, score_all, select

__version__ = "0.1.0"

__all__ = [
    "ComponentSpec",
    "ExpertDescriptor",
    "HashingProvider",
    "Registry",
    "RegistrySnapshot",
    "ResourceLedger",
    "RouteDecision",
    "SavingsReport",
    "SelectionConfig",
    "SentenceEmbedding",
    "SimilarityRanking",
    "cosine_similarity",
    "embed_query",
    "embed_tokens",
    "hash_embed_token",
    "load_registry",
    "mean_pool",
    "normalize_text",
    "save_registry",
    "score_all",
    "select",
]

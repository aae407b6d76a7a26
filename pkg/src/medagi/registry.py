"""Expert registry: descriptors, precomputed description embeddings, JSON persistence.

Readers grab ``Registry.snapshot`` (an immutable value) and never lock. Writers
serialize on one lock, build the next snapshot, persist it, then swap the
pointer. Embeddings are never written to disk; they are recomputed on load.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Optional

from medagi.embedding import EmbeddingProvider, SentenceEmbedding, embed_text
from medagi.errors import (
    DegenerateEmbedding,
    DuplicateId,
    EmbeddingFailure,
    EmptyInput,
    InvalidDescriptor,
    IoFailure,
    ParseFailure,
    ProviderFailure,
    UnknownExpert,
)

SCHEMA_VERSION = 1
ID_PATTERN = re.compile(r"^[a-z0-9][a-z0-9_-]{0,63}$")
DESCRIPTOR_KEYS = (
    "id",
    "display_name",
    "description",
    "adapter_ref",
    "backend_endpoint",
    "tags",
    "created_at",
)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    if not isinstance(text, str):
        raise ValueError("timestamp must be a string")
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class ExpertDescriptor:
    id: str
    display_name: str
    description: str
    adapter_ref: str
    backend_endpoint: Optional[str] = None
    tags: tuple[str, ...] = ()
    created_at: datetime = field(default_factory=utcnow)

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))
        if self.created_at.tzinfo is None:
            raise InvalidDescriptor("created_at must be timezone-aware")
        object.__setattr__(self, "created_at", self.created_at.astimezone(timezone.utc))

    def validate(self) -> None:
        if not isinstance(self.id, str) or not ID_PATTERN.match(self.id):
            raise InvalidDescriptor(f"invalid expert id {self.id!r}")
        if not isinstance(self.display_name, str):
            raise InvalidDescriptor("display_name must be a string")
        if not isinstance(self.description, str) or not self.description.strip():
            raise InvalidDescriptor("description must be a non-empty string")
        if not isinstance(self.adapter_ref, str) or not self.adapter_ref.strip():
            raise InvalidDescriptor("adapter_ref must be non-empty")
        if self.backend_endpoint is not None and not isinstance(self.backend_endpoint, str):
            raise InvalidDescriptor("backend_endpoint must be a string or null")
        if not all(isinstance(t, str) for t in self.tags):
            raise InvalidDescriptor("tags must be strings")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "description": self.description,
            "adapter_ref": self.adapter_ref,
            "backend_endpoint": self.backend_endpoint,
            "tags": list(self.tags),
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], *, strict: bool = True) -> "ExpertDescriptor":
        """Build a descriptor from its wire form.

        ``strict`` requires every key; otherwise optional fields may be omitted
        (used for API input). Unknown keys are always rejected.
        """
        if not isinstance(data, Mapping):
            raise InvalidDescriptor("expert must be an object")
        unknown = set(data) - set(DESCRIPTOR_KEYS)
        if unknown:
            raise InvalidDescriptor(f"unknown keys: {sorted(unknown)}")
        required = DESCRIPTOR_KEYS if strict else ("id", "description", "adapter_ref")
        missing = [k for k in required if k not in data]
        if missing:
            raise InvalidDescriptor(f"missing keys: {missing}")
        tags = data.get("tags", [])
        if not isinstance(tags, list):
            raise InvalidDescriptor("tags must be a list")
        try:
            created = parse_timestamp(data["created_at"]) if "created_at" in data else utcnow()
        except ValueError as exc:
            raise InvalidDescriptor(f"bad created_at: {exc}") from exc
        desc = cls(
            id=data["id"],
            display_name=data.get("display_name", data["id"]),
            description=data["description"],
            adapter_ref=data["adapter_ref"],
            backend_endpoint=data.get("backend_endpoint"),
            tags=tuple(tags),
            created_at=created,
        )
        desc.validate()
        return desc


@dataclass(frozen=True)
class DescriptionIndex:
    entries: Mapping[str, SentenceEmbedding]
    provider_fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, DescriptionIndex):
            return NotImplemented
        return self.provider_fingerprint == other.provider_fingerprint and dict(self.entries) == dict(
            other.entries
        )


@dataclass(frozen=True)
class RegistrySnapshot:
    experts: tuple[ExpertDescriptor, ...]
    index: DescriptionIndex
    version: int

    def __post_init__(self):
        object.__setattr__(self, "experts", tuple(sorted(self.experts, key=lambda e: e.id)))

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.experts]

    def get(self, expert_id: str) -> ExpertDescriptor:
        for e in self.experts:
            if e.id == expert_id:
                return e
        raise UnknownExpert(expert_id)

    def __len__(self) -> int:
        return len(self.experts)


def embed_description(description: str, provider: EmbeddingProvider) -> SentenceEmbedding:
    try:
        return embed_text(description, provider)
    except (EmptyInput, DegenerateEmbedding, ProviderFailure) as exc:
        raise EmbeddingFailure(f"cannot embed description: {exc}") from exc


def build_index(experts: Iterable[ExpertDescriptor], provider: EmbeddingProvider) -> DescriptionIndex:
    entries = {}
    for e in experts:
        try:
            entries[e.id] = embed_description(e.description, provider)
        except EmbeddingFailure as exc:
            raise EmbeddingFailure(f"expert {e.id!r}: {exc}") from exc
    return DescriptionIndex(entries, provider.fingerprint)


def dump_experts(experts: Iterable[ExpertDescriptor]) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experts": [e.to_dict() for e in sorted(experts, key=lambda e: e.id)],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def parse_experts(text: str) -> list[ExpertDescriptor]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(f"registry file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseFailure("registry document must be an object")
    if "schema_version" not in doc:
        raise ParseFailure("registry document has no schema_version")
    version = doc["schema_version"]
    if version != SCHEMA_VERSION or isinstance(version, bool):
        raise ParseFailure(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - {"schema_version", "experts"}
    if unknown:
        raise ParseFailure(f"unknown top-level keys: {sorted(unknown)}")
    raw = doc.get("experts")
    if not isinstance(raw, list):
        raise ParseFailure("'experts' must be a list")
    experts, seen = [], set()
    for i, item in enumerate(raw):
        try:
            e = ExpertDescriptor.from_dict(item, strict=True)
        except InvalidDescriptor as exc:
            raise ParseFailure(f"experts[{i}]: {exc}") from exc
        if e.id in seen:
            raise ParseFailure(f"duplicate expert id {e.id!r}")
        seen.add(e.id)
        experts.append(e)
    return experts


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(text)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def save_registry(snapshot: "RegistrySnapshot | Registry", path: str | os.PathLike) -> None:
    if isinstance(snapshot, Registry):
        snapshot = snapshot.snapshot
    _atomic_write(Path(path), dump_experts(snapshot.experts))


def load_registry(path: str | os.PathLike, provider: EmbeddingProvider) -> RegistrySnapshot:
    """Read a registry file and re-embed every description.

    The loaded version equals the number of experts, as if each had been
    registered once in a fresh registry.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    experts = parse_experts(text)
    return RegistrySnapshot(tuple(experts), build_index(experts, provider), len(experts))


class Registry:
    def __init__(self, provider: EmbeddingProvider, path: str | os.PathLike | None = None):
        self._provider = provider
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._snapshot = RegistrySnapshot((), DescriptionIndex({}, provider.fingerprint), 0)

    @classmethod
    def open(cls, provider: EmbeddingProvider, path: str | os.PathLike) -> "Registry":
        """Load ``path`` if it exists, else start empty; later writes persist there."""
        reg = cls(provider, path)
        if reg.path.exists():
            reg._snapshot = load_registry(reg.path, provider)
        return reg

    @property
    def provider(self) -> EmbeddingProvider:
        return self._provider

    @property
    def snapshot(self) -> RegistrySnapshot:
        return self._snapshot

    @property
    def version(self) -> int:
        return self._snapshot.version

    def list_experts(self) -> list[ExpertDescriptor]:
        return list(self._snapshot.experts)

    def _commit(self, experts: tuple[ExpertDescriptor, ...], index: DescriptionIndex) -> RegistrySnapshot:
        nxt = RegistrySnapshot(experts, index, self._snapshot.version + 1)
        if self.path is not None:
            _atomic_write(self.path, dump_experts(nxt.experts))
        self._snapshot = nxt
        return nxt

    def register(self, descriptor: ExpertDescriptor) -> RegistrySnapshot:
        descriptor.validate()
        with self._lock:
            cur = self._snapshot
            if descriptor.id in cur.index.entries:
                raise DuplicateId(f"expert {descriptor.id!r} already registered")
            emb = embed_description(descriptor.description, self._provider)
            entries = dict(cur.index.entries)
            entries[descriptor.id] = emb
            index = DescriptionIndex(entries, cur.index.provider_fingerprint)
            return self._commit(cur.experts + (descriptor,), index)

    def remove(self, expert_id: str) -> RegistrySnapshot:
        with self._lock:
            cur = self._snapshot
            if expert_id not in cur.index.entries:
                raise UnknownExpert(expert_id)
            experts = tuple(e for e in cur.experts if e.id != expert_id)
            entries = {k: v for k, v in cur.index.entries.items() if k != expert_id}
            return self._commit(experts, DescriptionIndex(entries, cur.index.provider_fingerprint))

    def rebuild_index(self, provider: EmbeddingProvider | None = None) -> DescriptionIndex:
        """Re-embed every description; on any failure the old index stays live."""
        provider = provider or self._provider
        with self._lock:
            cur = self._snapshot
            index = build_index(cur.experts, provider)
            self._provider = provider
            self._snapshot = RegistrySnapshot(cur.experts, index, cur.version + 1)
            return index

    def save(self, path: str | os.PathLike | None = None) -> None:
        target = path if path is not None else self.path
        if target is None:
            raise IoFailure("registry has no path")
        save_registry(self._snapshot, target)

"""Memory accounting for one shared backbone plus many small expert adapters.

Nothing is actually loaded: components are declared with a size and a
simulated load cost, and the ledger tracks what would be resident. Backbone
components are pinned once loaded. Adapters live in a budgeted cache and are
evicted least-recently-released first, never while leased.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal

from medagi.errors import (
    BudgetExhausted,
    DoubleRelease,
    DuplicateComponent,
    NoComponents,
    UnknownAdapter,
)

Kind = Literal["backbone", "adapter"]


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: Kind
    size_bytes: int
    load_cost_ms: int = 0

    def __post_init__(self):
        if self.kind not in ("backbone", "adapter"):
            raise ValueError(f"kind must be 'backbone' or 'adapter', got {self.kind!r}")
        if not isinstance(self.size_bytes, int) or self.size_bytes <= 0:
            raise ValueError("size_bytes must be a positive integer")
        if self.load_cost_ms < 0:
            raise ValueError("load_cost_ms must be non-negative")


@dataclass(frozen=True)
class SavingsReport:
    n_experts: int
    unified_bytes: int
    naive_bytes: int
    ratio: float


def savings(backbone_bytes: int, adapter_sizes: Iterable[int]) -> SavingsReport:
    sizes = list(adapter_sizes)
    if not sizes or backbone_bytes <= 0:
        raise NoComponents("need a backbone and at least one adapter")
    unified = backbone_bytes + sum(sizes)
    naive = sum(backbone_bytes + s for s in sizes)
    return SavingsReport(len(sizes), unified, naive, naive / unified)


@dataclass(eq=False)
class AdapterLease:
    lease_id: int
    expert_id: str
    adapter: str
    released: bool = field(default=False, repr=False)


@dataclass(frozen=True)
class LedgerEvent:
    kind: Literal["load", "evict"]
    name: str
    refcount: int  # refcount at the moment of the event


class ResourceLedger:
    def __init__(
        self,
        budget_bytes: int,
        components: Iterable[ComponentSpec] = (),
        *,
        event_history: int = 1024,
    ):
        if budget_bytes <= 0:
            raise ValueError("budget_bytes must be positive")
        self.budget_bytes = budget_bytes
        self._lock = threading.Lock()
        self.declared: dict[str, ComponentSpec] = {}
        self.resident: set[str] = set()
        self._resident_bytes = 0
        self.refcounts: dict[str, int] = {}
        self.evictions = 0
        self.load_counts: Counter[str] = Counter()
        self.simulated_load_ms = 0
        self.events: deque[LedgerEvent] = deque(maxlen=event_history)
        self.total_acquires = 0
        self.total_releases = 0
        self._bindings: dict[str, str] = {}
        self._last_release: dict[str, int] = {}
        self._clock = itertools.count()
        self._lease_ids = itertools.count(1)
        for spec in components:
            self.declare_component(spec)

    def declare_component(self, spec: ComponentSpec) -> None:
        with self._lock:
            if spec.name in self.declared:
                raise DuplicateComponent(f"component {spec.name!r} already declared")
            self.declared[spec.name] = spec
            self.refcounts[spec.name] = 0

    def bind_adapter(self, expert_id: str, adapter_name: str) -> None:
        with self._lock:
            self._bindings[expert_id] = adapter_name

    def is_declared(self, name: str) -> bool:
        return name in self.declared

    def adapter_for(self, expert_id: str) -> str:
        for name in (self._bindings.get(expert_id), f"{expert_id}_align", expert_id):
            if name is not None:
                spec = self.declared.get(name)
                if spec is not None and spec.kind == "adapter":
                    return name
        raise UnknownAdapter(f"no adapter declared for expert {expert_id!r}")

    @property
    def backbone(self) -> list[ComponentSpec]:
        return [s for s in self.declared.values() if s.kind == "backbone"]

    @property
    def adapters(self) -> list[ComponentSpec]:
        return [s for s in self.declared.values() if s.kind == "adapter"]

    @property
    def resident_bytes(self) -> int:
        return self._resident_bytes

    @property
    def outstanding_leases(self) -> int:
        return self.total_acquires - self.total_releases

    def _load(self, name: str) -> None:
        self.resident.add(name)
        self._resident_bytes += self.declared[name].size_bytes
        self.load_counts[name] += 1
        self.simulated_load_ms += self.declared[name].load_cost_ms
        self.events.append(LedgerEvent("load", name, self.refcounts[name]))

    def acquire(self, expert_id: str) -> AdapterLease:
        """Lease the expert's adapter, loading the backbone and adapter if needed.

        Fails fast with ``BudgetExhausted`` (ledger untouched) when the load
        cannot fit even after evicting every idle adapter.
        """
        with self._lock:
            adapter = self.adapter_for(expert_id)
            to_load = [s.name for s in self.backbone if s.name not in self.resident]
            if adapter not in self.resident:
                to_load.append(adapter)

            need = sum(self.declared[n].size_bytes for n in to_load)
            free = self.budget_bytes - self.resident_bytes
            victims: list[str] = []
            if need > free:
                idle = sorted(
                    (n for n in self.resident if self.declared[n].kind == "adapter" and self.refcounts[n] == 0),
                    key=lambda n: (self._last_release.get(n, -1), n),
                )
                for n in idle:
                    if need <= free:
                        break
                    victims.append(n)
                    free += self.declared[n].size_bytes
                if need > free:
                    raise BudgetExhausted(
                        f"adapter {adapter!r} needs {need} bytes; only {free} obtainable "
                        f"within budget {self.budget_bytes}"
                    )

            for n in victims:
                self.resident.discard(n)
                self._resident_bytes -= self.declared[n].size_bytes
                self.evictions += 1
                self.events.append(LedgerEvent("evict", n, self.refcounts[n]))
            for n in to_load:
                self._load(n)
                if self.declared[n].kind == "backbone":
                    self.refcounts[n] = 1

            self.refcounts[adapter] += 1
            self.total_acquires += 1
            return AdapterLease(next(self._lease_ids), expert_id, adapter)

    def release(self, lease: AdapterLease) -> None:
        with self._lock:
            if lease.released:
                raise DoubleRelease(f"lease {lease.lease_id} already released")
            lease.released = True
            self.refcounts[lease.adapter] -= 1
            self.total_releases += 1
            self._last_release[lease.adapter] = next(self._clock)

    @contextmanager
    def leased(self, expert_id: str) -> Iterator[AdapterLease]:
        lease = self.acquire(expert_id)
        try:
            yield lease
        finally:
            self.release(lease)

    def savings_report(self, n_experts: int) -> SavingsReport:
        adapters = self.adapters
        if n_experts <= 0 or not self.backbone:
            raise NoComponents("no experts to account for")
        if n_experts > len(adapters):
            raise NoComponents(f"only {len(adapters)} adapters declared, asked for {n_experts}")
        backbone_total = sum(s.size_bytes for s in self.backbone)
        return savings(backbone_total, (s.size_bytes for s in adapters[:n_experts]))

    def stats(self) -> dict:
        with self._lock:
            return {
                "budget_bytes": self.budget_bytes,
                "resident_bytes": self.resident_bytes,
                "resident": sorted(self.resident),
                "outstanding_leases": self.outstanding_leases,
                "evictions": self.evictions,
                "simulated_load_ms": self.simulated_load_ms,
            }


def default_backbone() -> list[ComponentSpec]:
    """Simulated sizes for the shared vision encoder, query transformer and LLM (4 GB total)."""
    return [
        ComponentSpec("vision_encoder", "backbone", 1_000_000_000, 800),
        ComponentSpec("query_transformer", "backbone", 200_000_000, 150),
        ComponentSpec("language_model", "backbone", 2_800_000_000, 2500),
    ]

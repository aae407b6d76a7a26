import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medagi.backbone import ComponentSpec, ResourceLedger, default_backbone, savings
from medagi.errors import (
    BudgetExhausted,
    DoubleRelease,
    DuplicateComponent,
    NoComponents,
    UnknownAdapter,
)

GB = 1_000_000_000
MB = 1_000_000


def ledger(budget, n_adapters=3, adapter=10 * MB):
    comps = [ComponentSpec("llm", "backbone", 4 * GB, 2000)]
    comps += [ComponentSpec(f"e{i}_align", "adapter", adapter, 5) for i in range(n_adapters)]
    return ResourceLedger(budget, comps)


def test_declare():
    led = ResourceLedger(5 * GB)
    led.declare_component(ComponentSpec("llm", "backbone", 4_000_000_000))
    led.declare_component(ComponentSpec("skingpt4_align", "adapter", 10_000_000))
    with pytest.raises(DuplicateComponent):
        led.declare_component(ComponentSpec("llm", "backbone", 1))
    assert led.resident == set()


def test_component_spec_validation():
    with pytest.raises(ValueError):
        ComponentSpec("x", "backbone", 0)
    with pytest.raises(ValueError):
        ComponentSpec("x", "gpu", 1)


def test_lru_trace_budget_fits_all_three():
    # 4.00 GB + 3 x 10 MB == 4.03 GB: everything fits, hand trace gives no eviction
    led = ledger(4_030_000_000)
    for eid in ("e0", "e1", "e2"):
        led.release(led.acquire(eid))
    assert led.evictions == 0
    assert led.resident == {"llm", "e0_align", "e1_align", "e2_align"}


def test_lru_trace_one_eviction():
    # room for two adapters: the third acquire evicts e0 (released first)
    led = ledger(4_020_000_000)
    led.release(led.acquire("e0"))
    led.release(led.acquire("e1"))
    led.release(led.acquire("e2"))
    assert led.evictions == 1
    assert led.resident == {"llm", "e1_align", "e2_align"}
    assert [(e.kind, e.name) for e in led.events] == [
        ("load", "llm"), ("load", "e0_align"), ("load", "e1_align"),
        ("evict", "e0_align"), ("load", "e2_align"),
    ]
    # e1 is now least recently released
    led.release(led.acquire("e0"))
    assert led.resident == {"llm", "e2_align", "e0_align"}
    assert led.evictions == 2


def test_warm_hit_and_refcount():
    led = ledger(5 * GB)
    a = led.acquire("e0")
    b = led.acquire("e0")
    assert led.refcounts["e0_align"] == 2
    assert led.load_counts["e0_align"] == 1
    led.release(a)
    led.release(b)
    assert led.refcounts["e0_align"] == 0
    assert "e0_align" in led.resident
    led.release(led.acquire("e0"))
    assert led.load_counts["e0_align"] == 1


def test_double_release():
    led = ledger(5 * GB)
    lease = led.acquire("e0")
    led.release(lease)
    with pytest.raises(DoubleRelease):
        led.release(lease)


def test_budget_exhausted_when_all_leased():
    led = ledger(4_020_000_000)
    led.acquire("e0")
    led.acquire("e1")
    before = (set(led.resident), dict(led.refcounts), led.evictions)
    with pytest.raises(BudgetExhausted):
        led.acquire("e2")
    assert (set(led.resident), dict(led.refcounts), led.evictions) == before


def test_budget_smaller_than_backbone():
    led = ledger(1 * GB)
    with pytest.raises(BudgetExhausted):
        led.acquire("e0")
    assert led.resident == set() and led.outstanding_leases == 0


def test_unknown_adapter():
    with pytest.raises(UnknownAdapter):
        ledger(5 * GB).acquire("ghost")


def test_explicit_binding():
    led = ledger(5 * GB)
    led.bind_adapter("skin", "e2_align")
    assert led.acquire("skin").adapter == "e2_align"


def test_leased_context_releases_on_error():
    led = ledger(5 * GB)
    with pytest.raises(RuntimeError):
        with led.leased("e0"):
            raise RuntimeError
    assert led.outstanding_leases == 0


def test_savings_report_arithmetic():
    rep = ledger(5 * GB).savings_report(3)
    # naive = sum over experts of (backbone + own adapter) = 3 * 4.01 GB
    assert rep.unified_bytes == 4_030_000_000
    assert rep.naive_bytes == 12_030_000_000
    assert rep.ratio == 12_030_000_000 / 4_030_000_000
    assert ledger(5 * GB).savings_report(1).ratio == 1.0
    with pytest.raises(NoComponents):
        ledger(5 * GB).savings_report(0)
    with pytest.raises(NoComponents):
        ledger(5 * GB, n_adapters=2).savings_report(3)
    with pytest.raises(NoComponents):
        ResourceLedger(GB).savings_report(1)


def test_default_backbone_is_4gb():
    assert sum(s.size_bytes for s in default_backbone()) == 4 * GB


@given(st.integers(1, 8 * GB), st.integers(1, 8 * GB), st.integers(1, 30))
def test_savings_monotone(backbone, adapter, n_max):
    adapters = [adapter] * n_max
    ratios = [savings(backbone, adapters[:n]).ratio for n in range(1, len(adapters) + 1)]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 5)), max_size=200), st.integers(1, 6))
def test_random_ops_keep_invariants(ops, room):
    led = ledger(4 * GB + room * 10 * MB, n_adapters=6)
    held = []
    for acquire, k in ops:
        if acquire or not held:
            try:
                held.append(led.acquire(f"e{k}"))
            except BudgetExhausted:
                pass
        else:
            led.release(held.pop(k % len(held)))
        assert led.resident_bytes <= led.budget_bytes
        assert led.outstanding_leases == len(held)
        for name, rc in led.refcounts.items():
            if rc > 0:
                assert name in led.resident
    assert all(e.refcount == 0 for e in led.events if e.kind == "evict")
    assert led.load_counts["llm"] <= 1


def test_concurrent_acquire_release():
    led = ledger(4 * GB + 30 * MB, n_adapters=6)
    errors = []

    def worker(seed):
        rng = random.Random(seed)
        for _ in range(300):
            try:
                with led.leased(f"e{rng.randrange(6)}"):
                    if led.resident_bytes > led.budget_bytes:
                        errors.append("over budget")
            except BudgetExhausted:
                pass

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    assert led.outstanding_leases == 0
    assert led.load_counts["llm"] == 1


def test_mixed_sizes_can_lower_ratio():
    # monotonicity holds for a fixed adapter size only
    assert savings(4, [1, 1, 1, 4]).ratio < savings(4, [1, 1, 1]).ratio

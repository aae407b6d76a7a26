from __future__ import annotations

import random

import pytest

from medagi.embedding import HashingProvider
from medagi.registry import ExpertDescriptor, Registry
from medagi.seeds import seed_registry

VOCAB = (
    "skin rash itch mole lesion eczema psoriasis acne dermatology melanoma blister "
    "chest x-ray lung rib heart pleural opacity radiograph pneumonia nodule effusion "
    "pathology stained slide tissue biopsy gland tumor carcinoma h&e gastric cell "
    "system image photo question answer model upload users analysis the a of and is"
).split()


@pytest.fixture
def provider():
    return HashingProvider(256)


@pytest.fixture
def seeded(provider):
    reg = Registry(provider)
    seed_registry(reg)
    return reg


def random_sentence(rng: random.Random, lo: int = 1, hi: int = 12) -> str:
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(lo, hi)))


def random_descriptor(rng: random.Random, expert_id: str) -> ExpertDescriptor:
    return ExpertDescriptor(
        id=expert_id,
        display_name=expert_id.upper(),
        description=random_sentence(rng),
        adapter_ref=f"adapter://{expert_id}",
    )


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            for key, value in getattr(rep, "user_properties", []):
                if key == "criterion":
                    lines.append((value, outcome))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")

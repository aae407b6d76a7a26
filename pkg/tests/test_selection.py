import random

import numpy as np
import pytest

import oracle
from conftest import random_descriptor, random_sentence
from medagi.embedding import HashingProvider, SentenceEmbedding
from medagi.errors import DegenerateEmbedding, EmptyInput, EmptyRegistry, FingerprintMismatch
from medagi.registry import ExpertDescriptor, Registry
from medagi.seeds import SKINGPT4_DESCRIPTION, seed_descriptors
from medagi.selection import SelectionConfig, embed_query, score_all, select

CFG = SelectionConfig()

# (question, expected winner, oracle ranking) from tests/oracle.py
ORACLE_ROUTES = [
    (
        "Could you diagnose this skin photo with a rash and itching?",
        "skingpt4",
        [("skingpt4", 0.4107690885482187), ("xraychat", 0.2940257679251105), ("pathologychat", 0.2318676226193896)],
    ),
    (
        "What abnormality is in this chest x-ray image?",
        "xraychat",
        [("xraychat", 0.4207859366938), ("pathologychat", 0.30267509423557604), ("skingpt4", 0.16308202433072141)],
    ),
    (
        "Describe this H&E stained pathology slide.",
        "pathologychat",
        [("pathologychat", 0.25556325364155497), ("skingpt4", 0.026087647355783578), ("xraychat", -0.04296321198338697)],
    ),
]


@pytest.mark.parametrize("question, winner, ranking", ORACLE_ROUTES)
def test_seed_routes_match_oracle(seeded, provider, question, winner, ranking):
    d = select(question, seeded.snapshot, CFG, provider)
    assert d.selected == winner
    assert d.ranking.order() == [eid for eid, _ in ranking]
    for (eid, s), (oid, os_) in zip(d.ranking.entries, ranking):
        assert s == pytest.approx(os_, abs=1e-12)
    assert d.margin == pytest.approx(ranking[0][1] - ranking[1][1], abs=1e-12)
    assert d.confident


def test_embed_query(provider):
    q = "what is this skin condition"
    e = embed_query(q, provider)
    assert e.dimension == 256
    assert e.values.tolist() == pytest.approx(oracle.sentence_vector(q), abs=1e-15)
    assert e == embed_query(q, provider)
    with pytest.raises(EmptyInput):
        embed_query("", provider)


def test_self_description_scores_one(seeded, provider):
    q = embed_query(SKINGPT4_DESCRIPTION, provider)
    r = score_all(q, seeded.snapshot)
    assert r.entries[0][0] == "skingpt4"
    assert r.entries[0][1] == pytest.approx(1.0, abs=1e-9)
    assert r.query_version == 3


def test_empty_registry(provider):
    snap = Registry(provider).snapshot
    with pytest.raises(EmptyRegistry):
        score_all(embed_query("skin", provider), snap)
    with pytest.raises(EmptyRegistry):
        select("skin", snap, CFG, provider)


def test_fingerprint_mismatch(seeded):
    q = embed_query("skin", HashingProvider(128))
    with pytest.raises(FingerprintMismatch):
        score_all(q, seeded.snapshot)


def test_ties_break_by_ascending_id(provider):
    reg = Registry(provider)
    for eid in ("zeta", "alpha", "mid"):
        reg.register(ExpertDescriptor(eid, eid, "stained pathology slide", f"a://{eid}"))
    d = select("stained pathology slide", reg.snapshot, CFG, provider)
    assert d.ranking.order() == ["alpha", "mid", "zeta"]
    assert all(s == pytest.approx(1.0, abs=1e-12) for _, s in d.ranking.entries)
    assert d.selected == "alpha" and d.margin == 0.0


def test_single_expert_margin_zero(provider):
    reg = Registry(provider)
    reg.register(seed_descriptors()[0])
    d = select("chest x-ray", reg.snapshot, CFG, provider)
    assert d.selected == "skingpt4" and d.margin == 0.0


def test_threshold(seeded, provider):
    q = ORACLE_ROUTES[0][0]
    assert not select(q, seeded.snapshot, SelectionConfig(threshold=0.9), provider).confident
    assert select(q, seeded.snapshot, SelectionConfig(threshold=0.4), provider).confident
    with pytest.raises(ValueError):
        SelectionConfig(top_k=0)
    with pytest.raises(ValueError):
        SelectionConfig(threshold=1.5)


def test_top_k_truncation_keeps_winner(seeded, provider):
    d = select(ORACLE_ROUTES[1][0], seeded.snapshot, CFG, provider).truncated(1)
    assert d.ranking.order() == ["xraychat"]
    assert d.to_dict()["selected"] == "xraychat"


def test_decision_serialization_is_deterministic(seeded, provider):
    a = select(ORACLE_ROUTES[2][0], seeded.snapshot, CFG, provider).to_json()
    b = select(ORACLE_ROUTES[2][0], seeded.snapshot, CFG, provider).to_json()
    assert a == b


def test_degenerate_query():
    class Cancelling(HashingProvider):
        def embed(self, tokens):
            return [np.eye(self.dimension)[0] * (1 if i % 2 == 0 else -1) for i, _ in enumerate(tokens)]

    p = Cancelling(8)
    with pytest.raises(DegenerateEmbedding):
        embed_query("up down", p)


def test_adding_expert_keeps_relative_order(provider):
    rng = random.Random(7)
    for _ in range(50):
        reg = Registry(provider)
        for i in range(rng.randint(2, 6)):
            reg.register(random_descriptor(rng, f"e{i}"))
        q = random_sentence(rng)
        before = select(q, reg.snapshot, CFG, provider).ranking.order()
        reg.register(random_descriptor(rng, "new"))
        after = [e for e in select(q, reg.snapshot, CFG, provider).ranking.order() if e != "new"]
        assert after == before


def test_ranking_scale_invariance_spot(seeded, provider):
    q = embed_query(ORACLE_ROUTES[0][0], provider)
    scaled = SentenceEmbedding(q.values * 37.5, q.provider_fingerprint)
    assert score_all(scaled, seeded.snapshot).order() == score_all(q, seeded.snapshot).order()


def test_rounding_noise_counts_as_tie(provider):
    # both descriptions are orthogonal to the query in exact arithmetic
    reg = Registry(provider)
    reg.register(ExpertDescriptor("b", "b", "skin opacity lung biopsy rash", "a://b"))
    reg.register(ExpertDescriptor("a", "a", "pathology a", "a://a"))
    reg.register(ExpertDescriptor("c", "c", "pleural psoriasis users question rib pleural image radiograph", "a://c"))
    q = embed_query("pleural psoriasis users question rib pleural image radiograph", provider)
    for alpha in (1.0, 208.6425070118426, 1e-3):
        scaled = SentenceEmbedding(q.values * alpha, q.provider_fingerprint)
        assert score_all(scaled, reg.snapshot).order()[1:] == ["a", "b"]

"""Standalone reference router used to freeze expected values.

Written independently of the ``medagi`` package: plain Python lists, its own
FNV-1a, its own tokenizer, its own cosine and argmax loop. Nothing here may
import from ``medagi``.

Run directly to print the golden values consumed by the test suite::

    python tests/oracle.py
"""

from __future__ import annotations

import functools
import json
import math
import sys
from pathlib import Path

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211
MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & MASK64
    return h


def tokenize(text: str) -> list[str]:
    out = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and not raw[start].isalnum():
            start += 1
        while end > start and not raw[end - 1].isalnum():
            end -= 1
        if start < end:
            out.append(raw[start:end])
    return out


def token_vector(token: str, dim: int) -> list[float]:
    return list(_token_vector(token, dim))


@functools.lru_cache(maxsize=None)
def _token_vector(token: str, dim: int) -> tuple[float, ...]:
    padded = "#" + token + "#"
    vec = [0.0] * dim
    for i in range(len(padded) - 2):
        h = fnv1a64(padded[i : i + 3].encode("utf-8"))
        if h >> 63:
            vec[h % dim] -= 1.0
        else:
            vec[h % dim] += 1.0
    norm = math.sqrt(sum(x * x for x in vec))
    if norm == 0.0:
        return tuple(vec)
    return tuple(x / norm for x in vec)


def sentence_vector(text: str, dim: int = 256) -> list[float]:
    tokens = tokenize(text)
    acc = [0.0] * dim
    for tok in tokens:
        tv = token_vector(tok, dim)
        for k in range(dim):
            acc[k] += tv[k]
    return [x / len(tokens) for x in acc]


def cosine(u: list[float], v: list[float]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return max(-1.0, min(1.0, dot / (nu * nv)))


def route(question: str, descriptions: dict[str, str], dim: int = 256) -> tuple[str, list[tuple[str, float]]]:
    q = sentence_vector(question, dim)
    scored = [(eid, cosine(q, sentence_vector(desc, dim))) for eid, desc in descriptions.items()]
    # scores within 1e-12 are ties; the smaller id wins
    best_id, best_score = None, -2.0
    for eid, s in sorted(scored):
        if best_id is None or round(s, 12) > round(best_score, 12):
            best_id, best_score = eid, s
    return best_id, sorted(scored, key=lambda p: (-round(p[1], 12), p[0]))


SEED_DESCRIPTIONS = {
    "skingpt4": (
        "SkinGPT is a revolutionary dermatology diagnostic system that utilizes an advanced "
        "vision-based large language model to assess skin conditions. By uploading personal skin "
        "photos to the system, users receive an autonomous analysis that can identify and "
        "categorize various skin conditions, and provide treatment recommendations."
    ),
    "xraychat": (
        "XrayChat is a cutting-edge system that enables interactive, multi-turn conversations "
        "about chest X-ray images. Users simply upload a chest X-ray image, ask any question about "
        "it, and XrayChat generates informed responses. The system utilizes an X-ray encoder, a "
        "large language model, and an adaptor to comprehend the X-ray image and produce accurate "
        "and helpful answers."
    ),
    "pathologychat": (
        "PathologyChat is a cutting-edge system that enables interactive, multi-round "
        "conversations about stained pathology images. Users simply upload a pathology image, ask "
        "any question about it, and PathologyChat generates informed responses."
    ),
}


def main(argv: list[str]) -> int:
    dim = 256
    skin = token_vector("skin", dim)
    print("skin first 4:", [repr(x) for x in skin[:4]])
    print("skin nonzero:", [(i, repr(x)) for i, x in enumerate(skin) if x != 0.0])
    a = token_vector("a", dim)
    print("a nonzero:", [(i, x) for i, x in enumerate(a) if x != 0.0])

    for q in (
        "Could you diagnose this skin photo with a rash and itching?",
        "What abnormality is in this chest x-ray image?",
        "Describe this H&E stained pathology slide.",
        "chest x-ray opacity?",
        "what is this skin condition",
    ):
        best, ranking = route(q, SEED_DESCRIPTIONS, dim)
        print(f"{q!r} -> {best} {ranking}  tokens={len(tokenize(q))}")

    corpus = Path(argv[1]) if len(argv) > 1 else Path(__file__).parents[1] / "src/medagi/data/keyword_corpus.jsonl"
    if corpus.exists():
        items = [json.loads(line) for line in corpus.read_text(encoding="utf-8").splitlines() if line.strip()]
        correct = 0
        for item in items:
            best, ranking = route(item["question"], SEED_DESCRIPTIONS, dim)
            ok = best == item["expected_expert"]
            correct += ok
            if not ok:
                print("MISS", item, ranking)
        print(f"corpus accuracy: {correct}/{len(items)} = {correct / len(items)!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))

"""Routing-accuracy evaluation over labeled question corpora.

A corpus is JSON Lines, one ``{"question": ..., "expected_expert": ...}`` per
line. ``evaluate`` routes every question and aggregates accuracy, a confusion
matrix and margins. ``write_outputs`` writes the JSON report, a per-item CSV
and (optionally) figures next to it.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional

from medagi.embedding import EmbeddingProvider
from medagi.errors import CorpusParseFailure, EmptyRegistry, UnknownExpectedExpert
from medagi.registry import RegistrySnapshot
from medagi.selection import SelectionConfig, select

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EvalItem:
    question: str
    expected_expert: str


@dataclass(frozen=True)
class ItemResult:
    question: str
    expected: str
    selected: str
    score: float
    margin: float
    correct: bool


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: dict[str, dict[str, int]]
    mean_margin: float
    per_item: tuple[ItemResult, ...]
    registry_version: int
    provider_fingerprint: str

    @property
    def labels(self) -> list[str]:
        return sorted(self.confusion)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "n_items": len(self.per_item),
            "accuracy": self.accuracy,
            "mean_margin": self.mean_margin,
            "registry_version": self.registry_version,
            "provider_fingerprint": self.provider_fingerprint,
            "confusion": self.confusion,
            "per_item": [
                {
                    "question": r.question,
                    "expected": r.expected,
                    "selected": r.selected,
                    "score": r.score,
                    "margin": r.margin,
                    "correct": r.correct,
                }
                for r in self.per_item
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def parse_corpus(text: str, source: str = "<corpus>") -> list[EvalItem]:
    items = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseFailure(f"{source}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict) or set(rec) != {"question", "expected_expert"}:
            raise CorpusParseFailure(f"{source}:{lineno}: expected keys question, expected_expert")
        q, label = rec["question"], rec["expected_expert"]
        if not isinstance(q, str) or not isinstance(label, str) or not q.strip() or not label:
            raise CorpusParseFailure(f"{source}:{lineno}: question and expected_expert must be non-empty strings")
        items.append(EvalItem(q, label))
    if not items:
        raise CorpusParseFailure(f"{source}: corpus is empty")
    return items


def load_corpus(path: str | os.PathLike) -> list[EvalItem]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusParseFailure(f"cannot read corpus {path}: {exc}") from exc
    return parse_corpus(text, str(path))


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("medagi") / "data" / "keyword_corpus.jsonl"))


def evaluate(
    items: Iterable[EvalItem],
    snapshot: RegistrySnapshot,
    provider: EmbeddingProvider,
    config: Optional[SelectionConfig] = None,
) -> EvalReport:
    items = list(items)
    config = config or SelectionConfig()
    if not items:
        raise CorpusParseFailure("corpus is empty")
    if len(snapshot) == 0:
        raise EmptyRegistry()
    known = set(snapshot.ids)
    missing = sorted({it.expected_expert for it in items} - known)
    if missing:
        raise UnknownExpectedExpert(f"corpus labels not in registry: {', '.join(missing)}")

    labels = sorted(known)
    confusion = {exp: {sel: 0 for sel in labels} for exp in labels}
    results = []
    for it in items:
        d = select(it.question, snapshot, config, provider)
        confusion[it.expected_expert][d.selected] += 1
        results.append(ItemResult(it.question, it.expected_expert, d.selected, d.score, d.margin, d.selected == it.expected_expert))

    correct = sum(r.correct for r in results)
    return EvalReport(
        accuracy=correct / len(results),
        confusion=confusion,
        mean_margin=sum(r.margin for r in results) / len(results),
        per_item=tuple(results),
        registry_version=snapshot.version,
        provider_fingerprint=snapshot.index.provider_fingerprint,
    )


def per_item_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["question", "expected", "selected", "score", "margin", "correct"])
    for r in report.per_item:
        w.writerow([r.question, r.expected, r.selected, repr(r.score), repr(r.margin), int(r.correct)])
    return buf.getvalue()


def format_table(report: EvalReport) -> str:
    lines = [
        f"items: {len(report.per_item)}  accuracy: {report.accuracy:.4f}  mean margin: {report.mean_margin:.4f}",
        "",
        "confusion (rows expected, columns selected):",
    ]
    labels = report.labels
    width = max(len(l) for l in labels) + 2
    lines.append(" " * width + "".join(f"{l:>{width}}" for l in labels))
    for exp in labels:
        lines.append(f"{exp:<{width}}" + "".join(f"{report.confusion[exp][sel]:>{width}}" for sel in labels))
    misses = [r for r in report.per_item if not r.correct]
    if misses:
        lines += ["", "misrouted:"]
        lines += [f"  [{r.expected} -> {r.selected}] {r.question}" for r in misses]
    return "\n".join(lines)


def default_report_path(corpus_path: str | os.PathLike) -> Path:
    p = Path(corpus_path)
    return p.with_name(p.stem + ".report.json")


def write_outputs(report: EvalReport, report_path: str | os.PathLike, *, figures: bool = True) -> list[Path]:
    """Write report JSON, per-item CSV and figures; returns every path written."""
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json(), encoding="utf-8")
    stem = report_path.name.removesuffix(".json")
    csv_path = report_path.with_name(stem + ".items.csv")
    csv_path.write_text(per_item_csv(report), encoding="utf-8")
    written = [report_path, csv_path]
    if figures:
        from medagi import plots

        written += plots.render_eval_figures(report, report_path.parent, stem)
    return written

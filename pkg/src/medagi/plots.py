"""Figures written next to evaluation and savings reports."""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

if TYPE_CHECKING:
    from medagi.backbone import SavingsReport
    from medagi.evaluation import EvalReport

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

# no timestamp or version string in the PNG, so reruns give identical files
PNG_METADATA = {"Software": None}


def figsize(width=5.0, height=None):
    golden = (math.sqrt(5) - 1.0) / 2.0
    return (width, height if height else width * golden)


def savefig(fig, path: str | os.PathLike, dpi=150) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi, bbox_inches="tight", metadata=PNG_METADATA)
    plt.close(fig)
    return path


def confusion_figure(report: "EvalReport"):
    labels = report.labels
    counts = [[report.confusion[e][s] for s in labels] for e in labels]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(4.2, 3.6))
        im = ax.imshow(counts, cmap="Blues", vmin=0)
        ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right")
        ax.set_yticks(range(len(labels)), labels)
        ax.set_xlabel("selected expert")
        ax.set_ylabel("expected expert")
        ax.set_title(f"routing confusion (accuracy {report.accuracy:.3f})")
        peak = max(max(row) for row in counts) or 1
        for i, row in enumerate(counts):
            for j, n in enumerate(row):
                ax.text(j, i, str(n), ha="center", va="center", color="white" if n > peak / 2 else "black")
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    return fig


def margin_figure(report: "EvalReport"):
    margins = [r.margin for r in report.per_item]
    colors = ["tab:green" if r.correct else "tab:red" for r in report.per_item]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(6.0))
        ax.bar(range(1, len(margins) + 1), margins, color=colors, width=0.8)
        ax.axhline(report.mean_margin, color="0.3", lw=0.8, ls="--", label=f"mean {report.mean_margin:.3f}")
        ax.set_xlabel("corpus item")
        ax.set_ylabel("top-1 minus top-2 score")
        ax.set_title("decision margin per item (red = misrouted)")
        ax.legend(frameon=False)
    return fig


def render_eval_figures(report: "EvalReport", outdir: str | os.PathLike, stem: str) -> list[Path]:
    outdir = Path(outdir)
    return [
        savefig(confusion_figure(report), outdir / f"{stem}.confusion.png"),
        savefig(margin_figure(report), outdir / f"{stem}.margins.png"),
    ]


def savings_figure(reports: Sequence["SavingsReport"]):
    n = [r.n_experts for r in reports]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=figsize(8.0, 3.0))
        ax1.plot(n, [r.naive_bytes / 1e9 for r in reports], marker="o", label="one backbone per expert")
        ax1.plot(n, [r.unified_bytes / 1e9 for r in reports], marker="s", label="shared backbone")
        ax1.set_xlabel("experts")
        ax1.set_ylabel("storage (GB)")
        ax1.legend(frameon=False)
        ax2.plot(n, [r.ratio for r in reports], marker="o", color="tab:purple")
        ax2.set_xlabel("experts")
        ax2.set_ylabel("naive / unified")
        ax2.set_title("savings ratio")
    return fig

"""Figure rendering for the report-emitting CLI paths.

Each function takes an already-computed report (the same JSON the CLI
prints) and writes PNG files into a directory, returning the written
paths. Rendering is file-only (Agg backend); nothing is shown.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _prep_dir(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def render_eval_figures(report: dict, out_dir: str | Path) -> list[Path]:
    """Accuracy histogram and recall/precision scatter from per-image rows."""
    out = _prep_dir(out_dir)
    rows = report.get("images", [])
    written = []

    acc = [r["recognition_accuracy"] for r in rows if "recognition_accuracy" in r]
    if acc:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(acc, bins=np.linspace(0, 1, 21), color="#4878cf", edgecolor="white")
        ax.axvline(
            report["aggregate"]["recognition_accuracy"],
            color="#d65f5f",
            linestyle="--",
            label=f"corpus {report['aggregate']['recognition_accuracy']:.3f}",
        )
        ax.set_xlabel("recognition accuracy")
        ax.set_ylabel("images")
        ax.set_title("Per-image recognition accuracy")
        ax.legend()
        fig.tight_layout()
        path = out / "recognition_accuracy_hist.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    pts = [
        (r["detection_recall"], r["detection_precision"])
        for r in rows
        if "detection_recall" in r
    ]
    if pts:
        rec, prec = zip(*pts)
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.scatter(rec, prec, s=18, alpha=0.6, color="#4878cf")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("detection recall")
        ax.set_ylabel("detection precision")
        ax.set_title("Detection recall vs precision per image")
        fig.tight_layout()
        path = out / "detection_scatter.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def render_grounding_figure(report: dict, out_dir: str | Path) -> list[Path]:
    """Histogram of per-image grounding accuracy."""
    out = _prep_dir(out_dir)
    rows = report.get("images", [])
    acc = [r["grounding_accuracy"] for r in rows if "grounding_accuracy" in r]
    if not acc:
        return []
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(acc, bins=np.linspace(0, 1, 21), color="#6acc65", edgecolor="white")
    ax.set_xlabel("grounding accuracy")
    ax.set_ylabel("images")
    ax.set_title("Per-image grounding accuracy")
    fig.tight_layout()
    path = out / "grounding_accuracy_hist.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_cosine_figure(report: dict, out_dir: str | Path) -> list[Path]:
    """Heatmap of the pairwise delta-cosine matrix."""
    out = _prep_dir(out_dir)
    matrix = np.asarray(report["pairwise"], dtype=float)
    labels = report.get("inputs", [str(i) for i in range(len(matrix))])
    fig, ax = plt.subplots(figsize=(1.2 * len(matrix) + 2, 1.2 * len(matrix) + 1.5))
    im = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="RdBu_r")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    for i in range(len(matrix)):
        for j in range(len(matrix)):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax, label="cosine similarity")
    ax.set_title("Checkpoint delta interference")
    fig.tight_layout()
    path = out / "delta_cosine.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_budget_figure(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """Grouped bars of unchunked vs peak logit bytes per stage."""
    out = _prep_dir(out_dir)
    stages = [r["stage"] for r in rows]
    unchunked = np.array([r["logit_bytes_unchunked"] for r in rows], dtype=float)
    peak = np.array([r["peak_bytes"] for r in rows], dtype=float)
    x = np.arange(len(stages))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(x - 0.2, unchunked / 2**30, width=0.4, label="unchunked", color="#b8b8b8")
    ax.bar(x + 0.2, peak / 2**30, width=0.4, label="peak (chunked)", color="#4878cf")
    ax.set_xticks(x, stages)
    ax.set_ylabel("logit tensor GiB")
    ax.set_title("Logit memory per training stage")
    ax.legend()
    fig.tight_layout()
    path = out / "logit_budget.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]

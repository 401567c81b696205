"""Figures rendered next to the delimited outputs of each command."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .inference import EvalReport
from .model import EpochStats


def save_loss_curves(trace: Sequence[EpochStats], path: str | Path) -> None:
    epochs = [row.epoch for row in trace]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(epochs, [row.total for row in trace], label="total", linewidth=2)
    ax.plot(epochs, [row.agg_nll for row in trace], label="aggregate nll")
    ax.plot(epochs, [row.view_nll for row in trace], label="per-view nll")
    ax.plot(epochs, [row.consistency for row in trace], label="consistency")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_eval_summary(report: EvalReport, path: str | Path) -> None:
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    names = ["accuracy", "mrr", "wu_palmer"]
    values = [report.accuracy, report.mrr, report.wu_palmer]
    bars = left.bar(names, values, color=["#4878d0", "#ee854a", "#6acc64"])
    left.set_ylim(0, 1.05)
    left.set_title("attachment metrics")
    left.bar_label(bars, fmt="%.3f")

    ranks = [rec.truth_rank for rec in report.records]
    right.hist(ranks, bins=range(1, max(ranks) + 2), align="left", color="#4878d0")
    right.set_xlabel("rank of true parent")
    right.set_ylabel("queries")
    right.set_title("truth rank distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_path_counts(counts: dict[int, int], path: str | Path) -> None:
    lengths = sorted(counts)
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar([str(l) for l in lengths], [counts[l] for l in lengths], color="#4878d0")
    ax.bar_label(bars)
    ax.set_xlabel("mini-path length")
    ax.set_ylabel("count")
    ax.set_title("mini-paths per length")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

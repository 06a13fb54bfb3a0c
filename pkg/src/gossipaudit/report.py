"""Figure rendering for run records and sweeps.

Figures are written next to the delimited outputs.  PNG metadata is pinned
so repeated renders of the same record are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PNG_META = {"Software": "gossipaudit"}


def render_convergence(record, path: Path) -> None:
    """Distance-to-optimum and dispersion per round, log scale."""
    rounds = record.rounds
    ts = [row["t"] for row in rounds]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if rounds and "mse_to_opt" in rounds[0]:
        ax.semilogy(ts, [row["mse_to_opt"] for row in rounds],
                    label="mean sq. distance to optimum")
    ax.semilogy(ts, [max(row["dispersion"], 1e-300) for row in rounds],
                label="consensus dispersion", alpha=0.8)
    ax.set_xlabel("round")
    ax.set_ylabel("squared error")
    title = f"outcome {record.outcome}" if record.outcome else "learning curve"
    ax.set_title(f"seed {record.seed}, {title}")
    ax.legend(frameon=False)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_sweep(aggregates, path: Path) -> None:
    """Detection rate against the swept value."""
    xs = [row["value"] for row in aggregates]
    ys = [row["detection_rate"] for row in aggregates]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(range(len(xs)), ys, marker="o")
    ax.set_xticks(range(len(xs)))
    ax.set_xticklabels([str(x) for x in xs])
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel(aggregates[0]["vary"])
    ax.set_ylabel("detection rate")
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_overlay(records, labels, path: Path) -> None:
    """Convergence curves of several runs on one axis (e.g. protocol vs
    baseline aggregator)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for record, label in zip(records, labels):
        rounds = record.rounds
        if not rounds or "mse_to_opt" not in rounds[0]:
            continue
        ax.semilogy([row["t"] for row in rounds],
                    [row["mse_to_opt"] for row in rounds], label=label)
    ax.set_xlabel("round")
    ax.set_ylabel("mean sq. distance to optimum")
    ax.legend(frameon=False)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)

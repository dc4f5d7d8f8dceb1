"""Report figures rendered next to the CSV output.

Headless-safe: the Agg backend is forced before pyplot loads. Figures are a
convenience view of the emitted CSV columns; the CSV stays the contract.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "plot_bound_curve",
    "plot_policy_comparison",
    "plot_accuracy_comparison",
]


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_bound_curve(evaluations, best_lam: float, best_value: float, path) -> Path:
    """Probed (price, bound) pairs with the minimizer highlighted."""
    pairs = sorted(evaluations)
    lams = [lam for lam, _ in pairs]
    values = [value for _, value in pairs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lams, values, "o-", ms=4, label="bound at probed price")
    ax.plot([best_lam], [best_value], "r*", ms=12, label="selected bound")
    ax.set_xlabel("per-worker price")
    ax.set_ylabel("upper bound on expected reward")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def _bar_with_ci(ax, names, means, lows, highs):
    xs = range(len(names))
    errors = [
        [mean - lo for mean, lo in zip(means, lows)],
        [hi - mean for mean, hi in zip(means, highs)],
    ]
    ax.bar(xs, means, yerr=errors, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=20)


def plot_policy_comparison(rows, bound_per_task: float, path) -> Path:
    """Per-task mean reward per policy (95% CI) against the bound.

    rows: iterable of (policy_name, per_task_mean, per_task_lo, per_task_hi).
    """
    rows = list(rows)
    names = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    _bar_with_ci(ax, names, [r[1] for r in rows], [r[2] for r in rows], [r[3] for r in rows])
    ax.axhline(bound_per_task, color="tab:red", ls="--", label="upper bound / task")
    ax.set_ylabel("mean reward per task")
    ax.set_ylim(0.45, max(1.02, bound_per_task * 1.02))
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def plot_accuracy_comparison(rows, path) -> Path:
    """Replay accuracy per policy with 95% CI."""
    rows = list(rows)
    names = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    _bar_with_ci(ax, names, [r[1] for r in rows], [r[2] for r in rows], [r[3] for r in rows])
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)

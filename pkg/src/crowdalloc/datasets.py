"""Labeled-dataset ingestion for replay mode and empirical prior fitting.

Canonical file format: CSV with header ``task_id,gold,labels`` where
``labels`` is a string of '0'/'1' characters in elicitation order, e.g.
``rte_17,1,1101101110``. UTF-8, LF line endings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "TaskRecord",
    "LabeledDataset",
    "DatasetFormatError",
    "load_dataset",
    "save_dataset",
    "split_holdout",
    "fit_prior_mom",
    "empirical_theta",
]

_HEADER = "task_id,gold,labels"


class DatasetFormatError(ValueError):
    """A dataset file violated the canonical schema."""


@dataclass(frozen=True)
class TaskRecord:
    """One task: its recorded crowd labels (in order) and the gold label."""

    task_id: str
    labels: tuple[int, ...]
    gold: int

    def __post_init__(self) -> None:
        if not self.task_id:
            raise ValueError("task_id must be nonempty")
        if "," in self.task_id or "\n" in self.task_id:
            raise ValueError("task_id may not contain commas or newlines")
        if len(self.labels) == 0:
            raise ValueError(f"task {self.task_id} has no labels")
        if any(label not in (0, 1) for label in self.labels):
            raise ValueError(f"task {self.task_id} has non-binary labels")
        if self.gold not in (0, 1):
            raise ValueError(f"task {self.task_id} has non-binary gold label")


@dataclass(frozen=True)
class LabeledDataset:
    tasks: tuple[TaskRecord, ...]

    def __post_init__(self) -> None:
        ids = [t.task_id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("task_ids must be unique")

    def __len__(self) -> int:
        return len(self.tasks)


def load_dataset(path: str | Path) -> LabeledDataset:
    """Parse a canonical CSV file, reporting the offending line on errors."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _HEADER:
        raise DatasetFormatError(f"{path}:1: expected header {_HEADER!r}")
    records = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DatasetFormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        task_id, gold_str, labels_str = parts
        if gold_str not in ("0", "1"):
            raise DatasetFormatError(
                f"{path}:{lineno}: gold label must be 0 or 1, got {gold_str!r}"
            )
        if not labels_str or any(c not in "01" for c in labels_str):
            raise DatasetFormatError(
                f"{path}:{lineno}: labels must be a nonempty string over '0'/'1'"
            )
        if task_id in seen:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate task_id {task_id!r}")
        seen.add(task_id)
        try:
            records.append(
                TaskRecord(
                    task_id=task_id,
                    labels=tuple(int(c) for c in labels_str),
                    gold=int(gold_str),
                )
            )
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return LabeledDataset(tasks=tuple(records))


def save_dataset(dataset: LabeledDataset, path: str | Path) -> None:
    """Serialize in the canonical form; load/save round-trips byte-identically."""
    out = [_HEADER]
    for record in dataset.tasks:
        labels = "".join(str(c) for c in record.labels)
        out.append(f"{record.task_id},{record.gold},{labels}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def split_holdout(
    dataset: LabeledDataset, holdout_size: int, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded split into (holdout, remainder), each keeping file order."""
    if not (0 <= holdout_size < len(dataset)):
        raise ValueError(
            f"holdout_size must be in [0, {len(dataset) - 1}], got {holdout_size}"
        )
    rng = np.random.default_rng(seed)
    picked = rng.permutation(len(dataset))[:holdout_size]
    chosen = set(int(i) for i in picked)
    holdout = tuple(t for i, t in enumerate(dataset.tasks) if i in chosen)
    remainder = tuple(t for i, t in enumerate(dataset.tasks) if i not in chosen)
    return LabeledDataset(holdout), LabeledDataset(remainder)


def empirical_theta(record: TaskRecord) -> float:
    """Observed positive-label fraction for one task."""
    return sum(record.labels) / len(record.labels)


def fit_prior_mom(holdout: LabeledDataset) -> tuple[float, float]:
    """Method-of-moments Beta fit to the holdout tasks' empirical rates.

    Matches mean m and population variance v: the common factor is
    m(1-m)/v - 1. Degenerate holdouts (zero variance, or variance at or
    beyond the Bernoulli limit m(1-m)) fall back to the uniform prior (1, 1)
    with a warning.
    """
    if len(holdout) < 2:
        raise ValueError("prior fitting needs at least 2 holdout tasks")
    thetas = np.array([empirical_theta(t) for t in holdout.tasks])
    m = float(thetas.mean())
    v = float(thetas.var())  # population (divide-by-n) variance
    if v == 0.0 or v >= m * (1.0 - m):
        warnings.warn(
            f"degenerate holdout moments (m={m:.6g}, v={v:.6g}); "
            "falling back to the uniform prior (1, 1)",
            RuntimeWarning,
            stacklevel=2,
        )
        return (1.0, 1.0)
    factor = m * (1.0 - m) / v - 1.0
    return (m * factor, (1.0 - m) * factor)

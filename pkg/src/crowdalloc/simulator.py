"""Discrete-event simulation of the labeling chain under a chosen policy.

Two label sources: synthetic mode draws each task's true positive rate from
its prior once per episode and emits i.i.d. Bernoulli labels (equivalent in
distribution to the chain's posterior-predictive kernel); replay mode feeds
recorded crowd labels in file order and scores accuracy against gold labels.

Replications use independent, order-independent streams derived from the
instance master seed, so reruns are bit-identical.

Per-replication CSV schema (stable):
    replication,policy,K,U,reward,accuracy,skipped,max_task_load
with accuracy left empty in synthetic mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .belief import Label, predicted_label, total_reward
from .chain import (
    ARRIVAL,
    Instance,
    apply_event,
    initial_state,
    is_terminal,
    replication_rng,
    sample_next_event,
)
from .datasets import TaskRecord
from .policies import PolicyKind, choose

__all__ = [
    "LabelSource",
    "EpisodeResult",
    "ReplicationStats",
    "CapReport",
    "run_episode",
    "run_many",
    "run_replications",
    "validate_cap",
    "confidence_interval",
    "write_replication_csv",
    "REPLICATION_CSV_HEADER",
]

SYNTHETIC = "synthetic"
REPLAY = "replay"

REPLICATION_CSV_HEADER = (
    "replication,policy,K,U,reward,accuracy,skipped,max_task_load"
)


@dataclass(frozen=True)
class LabelSource:
    """Where completion labels come from: the prior, or a recorded dataset."""

    mode: str
    records: tuple[TaskRecord, ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in (SYNTHETIC, REPLAY):
            raise ValueError(f"unknown label source mode {self.mode!r}")
        if self.mode == REPLAY and not self.records:
            raise ValueError("replay mode requires task records")

    @classmethod
    def synthetic(cls) -> "LabelSource":
        return cls(mode=SYNTHETIC)

    @classmethod
    def replay(cls, records) -> "LabelSource":
        return cls(mode=REPLAY, records=tuple(records))

    def start_episode(self, instance: Instance, rng: np.random.Generator):
        if self.mode == SYNTHETIC:
            return _SyntheticLabels(instance, rng)
        if len(self.records) != instance.num_tasks:
            raise ValueError(
                f"replay source has {len(self.records)} tasks but the instance "
                f"has {instance.num_tasks}"
            )
        return _ReplayLabels(self.records, rng)


class _SyntheticLabels:
    """One true theta per task, drawn from the prior at episode start."""

    def __init__(self, instance: Instance, rng: np.random.Generator) -> None:
        alphas = np.array([a for a, _ in instance.priors])
        betas = np.array([b for _, b in instance.priors])
        self.thetas = rng.beta(alphas, betas)
        self._rng = rng
        self.exhausted = 0

    def draw(self, task: int) -> Label:
        return Label.from_int(int(self._rng.random() < self.thetas[task]))

    def accuracy(self, beliefs) -> float | None:
        return None


class _ReplayLabels:
    """Recorded labels consumed in order; exhausted tasks resample their own history."""

    def __init__(self, records: tuple[TaskRecord, ...], rng: np.random.Generator) -> None:
        self._records = records
        self._positions = [0] * len(records)
        self._rng = rng
        self.exhausted = 0

    def draw(self, task: int) -> Label:
        labels = self._records[task].labels
        pos = self._positions[task]
        if pos < len(labels):
            self._positions[task] = pos + 1
            return Label.from_int(labels[pos])
        self.exhausted += 1
        return Label.from_int(labels[int(self._rng.integers(len(labels)))])

    def accuracy(self, beliefs) -> float:
        correct = sum(
            1
            for belief, record in zip(beliefs, self._records)
            if predicted_label(belief) is Label.from_int(record.gold)
        )
        return correct / len(self._records)


@dataclass(frozen=True)
class EpisodeResult:
    """Terminal outcome of one simulated run."""

    terminal_reward: float
    accuracy: float | None
    assignments: tuple[int, ...]
    skipped: int
    events: int
    replay_exhausted: int = 0


@dataclass(frozen=True)
class ReplicationStats:
    """Normal-approximation summary of per-episode rewards."""

    n: int
    mean: float
    ci_lo: float
    ci_hi: float
    per_task_mean: float


@dataclass(frozen=True)
class CapReport:
    """Whether any task ever used as many workers as the cap allows."""

    worker_cap: int
    max_task_load: int
    flagged: bool
    episodes: int


def run_episode(
    instance: Instance,
    policy: PolicyKind,
    source: LabelSource,
    rng: np.random.Generator,
) -> EpisodeResult:
    """Walk the chain from the empty state until absorption.

    Arrivals within budget ask the policy for a task; completions consume a
    label from the source. With no deadline every trajectory must end within
    10*U + 10 events (the spare capacity covers post-budget arrivals).
    """
    reader = source.start_episode(instance, rng)
    state = initial_state(instance)
    assignments = [0] * instance.num_tasks
    skipped = 0
    events = 0
    if math.isinf(instance.horizon):
        max_events = 10 * instance.budget + 10
    else:
        max_events = 10_000_000
    while not is_terminal(state, instance):
        event = sample_next_event(state, instance, rng, label_for=reader.draw)
        assignment = None
        if (
            event.kind == ARRIVAL
            and state.arrivals_used < instance.budget
            and state.time + event.gap < instance.horizon
        ):
            decision = choose(policy, state, instance, rng)
            assignment = decision.task
            if assignment is None:
                skipped += 1
            else:
                assignments[assignment] += 1
        state = apply_event(state, event, assignment, instance)
        events += 1
        if events > max_events:
            raise RuntimeError(
                f"episode exceeded {max_events} events without terminating"
            )
    return EpisodeResult(
        terminal_reward=total_reward(state.beliefs),
        accuracy=reader.accuracy(state.beliefs),
        assignments=tuple(assignments),
        skipped=skipped,
        events=events,
        replay_exhausted=reader.exhausted,
    )


def run_many(
    instance: Instance,
    policy: PolicyKind,
    source: LabelSource,
    n: int,
) -> list[EpisodeResult]:
    """n independent episodes on streams derived from the master seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [
        run_episode(instance, policy, source, replication_rng(instance.master_seed, rep))
        for rep in range(n)
    ]


def confidence_interval(samples) -> tuple[float, float, float]:
    """(mean, lo, hi): 95% normal interval with the n-1 sample deviation."""
    values = np.asarray(samples, dtype=float)
    if values.size < 2:
        raise ValueError("confidence_interval needs at least 2 samples")
    mean = float(values.mean())
    halfwidth = 1.96 * float(values.std(ddof=1)) / math.sqrt(values.size)
    return mean, mean - halfwidth, mean + halfwidth


def run_replications(
    instance: Instance,
    policy: PolicyKind,
    source: LabelSource,
    n: int,
) -> ReplicationStats:
    """Summary statistics of the terminal reward over n replications."""
    if n < 2:
        raise ValueError("run_replications needs n >= 2")
    episodes = run_many(instance, policy, source, n)
    mean, lo, hi = confidence_interval([e.terminal_reward for e in episodes])
    return ReplicationStats(
        n=n, mean=mean, ci_lo=lo, ci_hi=hi, per_task_mean=mean / instance.num_tasks
    )


def validate_cap(instance: Instance, policy: PolicyKind, n: int) -> CapReport:
    """Check whether the worker cap binds: does any task ever use cap workers?"""
    if n < 1:
        raise ValueError("n must be >= 1")
    episodes = run_many(instance, policy, LabelSource.synthetic(), n)
    max_load = max(max(e.assignments) for e in episodes)
    return CapReport(
        worker_cap=instance.worker_cap,
        max_task_load=max_load,
        flagged=max_load >= instance.worker_cap,
        episodes=n,
    )


def _format_value(value: float | None) -> str:
    return "" if value is None else repr(value)


def write_replication_csv(
    path: str | Path,
    instance: Instance,
    results: dict[str, list[EpisodeResult]],
) -> None:
    """Write the stable per-replication schema; one row per (policy, episode)."""
    lines = [REPLICATION_CSV_HEADER]
    for policy_name, episodes in results.items():
        for rep, episode in enumerate(episodes):
            lines.append(
                ",".join(
                    [
                        str(rep),
                        policy_name,
                        str(instance.num_tasks),
                        str(instance.budget),
                        repr(episode.terminal_reward),
                        _format_value(episode.accuracy),
                        str(episode.skipped),
                        str(max(episode.assignments)),
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

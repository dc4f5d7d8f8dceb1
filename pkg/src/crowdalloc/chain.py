"""Continuous-time Markov chain of the labeling system.

State = (per-task Beta posteriors, clock, workers in flight per task, arrivals
consumed). Events are worker arrivals (Poisson, rate r) and task completions
(each in-flight worker finishes after an Exponential(mu) time). The embedded
jump chain is what the simulator and the exact oracle both walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .belief import Label, TaskBelief, posterior_update

__all__ = [
    "Instance",
    "SystemState",
    "Event",
    "initial_state",
    "event_rate",
    "event_distribution",
    "sample_next_event",
    "apply_event",
    "is_terminal",
    "replication_rng",
]

ARRIVAL = "arrival"
COMPLETION = "completion"

DEFAULT_ARRIVAL_RATE = 0.1
DEFAULT_COMPLETION_RATE = 0.4
DEFAULT_THRESHOLD = 0.5
DEFAULT_PRIOR = (1.0, 1.0)
DEFAULT_WORKER_CAP = 15


@dataclass(frozen=True)
class Instance:
    """Problem configuration shared by the simulator, bound, and oracle."""

    num_tasks: int
    budget: int
    priors: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]
    horizon: float = math.inf
    arrival_rate: float = DEFAULT_ARRIVAL_RATE
    completion_rate: float = DEFAULT_COMPLETION_RATE
    worker_cap: int = DEFAULT_WORKER_CAP
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.num_tasks < 1:
            raise ValueError("num_tasks must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if not (self.arrival_rate > 0 and self.completion_rate > 0):
            raise ValueError("arrival_rate and completion_rate must be positive")
        if not (self.horizon > 0):
            raise ValueError("horizon must be positive (math.inf for no deadline)")
        if self.worker_cap < 1:
            raise ValueError("worker_cap must be >= 1")
        if len(self.priors) != self.num_tasks or len(self.thresholds) != self.num_tasks:
            raise ValueError("priors and thresholds must have one entry per task")
        for a0, b0 in self.priors:
            if not (a0 > 0 and b0 > 0):
                raise ValueError(f"prior parameters must be positive, got ({a0}, {b0})")
        for d in self.thresholds:
            if not (0.0 < d < 1.0):
                raise ValueError(f"threshold must lie in (0, 1), got {d}")

    @classmethod
    def with_defaults(
        cls,
        num_tasks: int,
        budget: int | None = None,
        prior: tuple[float, float] = DEFAULT_PRIOR,
        threshold: float = DEFAULT_THRESHOLD,
        arrival_rate: float = DEFAULT_ARRIVAL_RATE,
        completion_rate: float = DEFAULT_COMPLETION_RATE,
        worker_cap: int | None = None,
        horizon: float = math.inf,
        master_seed: int = 0,
    ) -> "Instance":
        """Homogeneous instance with the standard experiment defaults.

        budget defaults to ceil(1.2 * num_tasks), the cap to min(budget, 15).
        """
        if budget is None:
            budget = math.ceil(1.2 * num_tasks)
        if worker_cap is None:
            worker_cap = max(1, min(budget, DEFAULT_WORKER_CAP))
        return cls(
            num_tasks=num_tasks,
            budget=budget,
            priors=tuple((float(prior[0]), float(prior[1])) for _ in range(num_tasks)),
            thresholds=tuple(float(threshold) for _ in range(num_tasks)),
            horizon=horizon,
            arrival_rate=arrival_rate,
            completion_rate=completion_rate,
            worker_cap=worker_cap,
            master_seed=master_seed,
        )


@dataclass(frozen=True)
class SystemState:
    """Full chain state: posteriors, clock, in-flight workers, arrivals used."""

    beliefs: tuple[TaskBelief, ...]
    time: float
    in_flight: tuple[int, ...]
    arrivals_used: int

    def __post_init__(self) -> None:
        if len(self.beliefs) != len(self.in_flight):
            raise ValueError("beliefs and in_flight must have the same length")
        if any(w < 0 for w in self.in_flight):
            raise ValueError("in_flight counts must be nonnegative")
        if self.arrivals_used < 0:
            raise ValueError("arrivals_used must be nonnegative")
        if self.time < 0:
            raise ValueError("time must be nonnegative")


@dataclass(frozen=True)
class Event:
    """One jump of the chain: a worker arrival or a task completion."""

    kind: str
    gap: float
    task: int | None = None
    label: Label | None = None

    def __post_init__(self) -> None:
        if self.kind not in (ARRIVAL, COMPLETION):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == COMPLETION and (self.task is None or self.label is None):
            raise ValueError("completion events must carry a task index and a label")
        if self.kind == ARRIVAL and (self.task is not None or self.label is not None):
            raise ValueError("arrival events carry neither task nor label")
        if not (self.gap > 0):
            raise ValueError("gap must be positive")


def initial_state(instance: Instance) -> SystemState:
    beliefs = tuple(
        TaskBelief(a0, b0, d)
        for (a0, b0), d in zip(instance.priors, instance.thresholds)
    )
    return SystemState(
        beliefs=beliefs,
        time=0.0,
        in_flight=(0,) * instance.num_tasks,
        arrivals_used=0,
    )


def event_rate(state: SystemState, instance: Instance) -> float:
    """Total jump rate q(s) = mu * (workers in flight) + r."""
    return instance.completion_rate * sum(state.in_flight) + instance.arrival_rate


def event_distribution(
    state: SystemState, instance: Instance
) -> tuple[float, list[tuple[int, float, float]]]:
    """Next-event distribution: (P[arrival], [(task, P[pos done], P[neg done])]).

    The probability vector sums to one analytically; the assertion guards the
    arithmetic before anything samples from it.
    """
    q = event_rate(state, instance)
    p_arrival = instance.arrival_rate / q
    completions = []
    total = p_arrival
    for x, (b, w) in enumerate(zip(state.beliefs, state.in_flight)):
        if w == 0:
            continue
        p_done = instance.completion_rate * w / q
        p_pos = b.alpha / (b.alpha + b.beta) * p_done
        p_neg = b.beta / (b.alpha + b.beta) * p_done
        completions.append((x, p_pos, p_neg))
        total += p_pos + p_neg
    assert abs(total - 1.0) < 1e-9, f"event probabilities sum to {total}"
    return p_arrival, completions


def sample_next_event(
    state: SystemState,
    instance: Instance,
    rng: np.random.Generator,
    label_for=None,
) -> Event:
    """Draw the next event of the embedded chain.

    The gap is Exponential(q); the event is an arrival with probability r/q,
    otherwise a completion on task x with probability proportional to mu*w_x.
    Completion labels default to posterior-predictive draws; `label_for(task)`
    overrides the label source (the simulator plugs ground truth in here).
    """
    if is_terminal(state, instance):
        raise ValueError("cannot sample an event from a terminal state")
    q = event_rate(state, instance)
    gap = rng.exponential(1.0 / q)
    pick = rng.random() * q
    if pick < instance.arrival_rate:
        return Event(kind=ARRIVAL, gap=gap)
    pick -= instance.arrival_rate
    task = -1
    for x, w in enumerate(state.in_flight):
        if w == 0:
            continue
        block = instance.completion_rate * w
        if pick < block:
            task = x
            break
        pick -= block
    else:
        task = max(x for x, w in enumerate(state.in_flight) if w > 0)
    if label_for is not None:
        label = label_for(task)
    else:
        b = state.beliefs[task]
        label = Label.POSITIVE if rng.random() < b.alpha / (b.alpha + b.beta) else Label.NEGATIVE
    return Event(kind=COMPLETION, gap=gap, task=task, label=label)


def apply_event(
    state: SystemState,
    event: Event,
    assignment: int | None,
    instance: Instance,
) -> SystemState:
    """Advance the chain by one event.

    Crossing the horizon cancels all in-flight work and only moves the clock.
    An arrival within budget consumes one budget unit whether or not a task is
    assigned; a completion folds its label into that task's posterior.
    """
    new_time = state.time + event.gap
    if new_time >= instance.horizon:
        if assignment is not None:
            raise ValueError("no assignment is possible past the horizon")
        return SystemState(
            beliefs=state.beliefs,
            time=new_time,
            in_flight=(0,) * len(state.in_flight),
            arrivals_used=state.arrivals_used,
        )

    if event.kind == ARRIVAL:
        if state.arrivals_used >= instance.budget:
            # budget exhausted: the worker cannot be used, only time moves
            if assignment is not None:
                raise ValueError("cannot assign an arrival once the budget is exhausted")
            return SystemState(
                beliefs=state.beliefs,
                time=new_time,
                in_flight=state.in_flight,
                arrivals_used=state.arrivals_used,
            )
        in_flight = state.in_flight
        if assignment is not None:
            if not (0 <= assignment < instance.num_tasks):
                raise ValueError(f"assignment {assignment} out of range")
            if state.in_flight[assignment] >= instance.worker_cap:
                raise ValueError(f"task {assignment} already holds worker_cap workers")
            in_flight = tuple(
                w + 1 if x == assignment else w for x, w in enumerate(state.in_flight)
            )
        return SystemState(
            beliefs=state.beliefs,
            time=new_time,
            in_flight=in_flight,
            arrivals_used=state.arrivals_used + 1,
        )

    # completion
    if assignment is not None:
        raise ValueError("completions take no assignment")
    x = event.task
    if state.in_flight[x] < 1:
        raise ValueError(f"no worker in flight on task {x}")
    beliefs = tuple(
        posterior_update(b, event.label) if i == x else b
        for i, b in enumerate(state.beliefs)
    )
    in_flight = tuple(w - 1 if i == x else w for i, w in enumerate(state.in_flight))
    return SystemState(
        beliefs=beliefs,
        time=new_time,
        in_flight=in_flight,
        arrivals_used=state.arrivals_used,
    )


def is_terminal(state: SystemState, instance: Instance) -> bool:
    """Absorbed iff the horizon elapsed, or budget spent with nothing in flight."""
    if state.time >= instance.horizon:
        return True
    return state.arrivals_used >= instance.budget and all(w == 0 for w in state.in_flight)


def replication_rng(master_seed: int, replication: int) -> np.random.Generator:
    """Independent per-replication stream, order-independent and reproducible.

    Uses numpy's splittable SeedSequence: stream i equals the i-th spawned
    child of SeedSequence(master_seed).
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replication,)))

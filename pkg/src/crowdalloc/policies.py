"""Allocation policies: who gets the worker that just walked in.

All policies share one contract: given the current system state and an
arrival with budget remaining, nominate at most one task (never one at its
worker cap) together with the per-task scores behind the choice. Skipping
still burns a budget unit, so every policy assigns whenever any task is
eligible.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .belief import TaskBelief, task_reward
from .chain import Instance, SystemState
from .single_task_dp import TaskDpParams, TaskDpState, index_lambda_star

__all__ = [
    "PolicyKind",
    "PolicyDecision",
    "index_choose",
    "okg_choose",
    "thompson_choose",
    "ucb_tuned_choose",
    "round_robin_choose",
    "choose",
    "DETERMINISTIC_KINDS",
]

# exact switching prices are affordable for small budgets; for large ones the
# price resolution is coarsened (task ranks are insensitive at that scale and
# the bisection cost per cache miss drops by half per doubling)
INDEX_TOL_EXACT = 1e-6
INDEX_TOL_LARGE_BUDGET = 1e-3
LARGE_BUDGET_CUTOFF = 30


class PolicyKind(enum.Enum):
    INDEX = "index"
    OKG = "okg"
    THOMPSON = "thompson"
    UCB_TUNED = "ucb_tuned"
    ROUND_ROBIN = "round_robin"

    @classmethod
    def from_name(cls, name: str) -> "PolicyKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown policy {name!r}; expected one of: {valid}") from None


DETERMINISTIC_KINDS = frozenset(
    {PolicyKind.INDEX, PolicyKind.OKG, PolicyKind.UCB_TUNED, PolicyKind.ROUND_ROBIN}
)


@dataclass(frozen=True)
class PolicyDecision:
    """Chosen task (None = skip, only when nothing is eligible) plus scores."""

    task: int | None
    scores: tuple[float, ...]


def _eligible(state: SystemState, instance: Instance) -> list[int]:
    return [
        x for x, w in enumerate(state.in_flight) if w < instance.worker_cap
    ]


def _argmax_eligible(scores: list[float], eligible: list[int]) -> int | None:
    best: int | None = None
    best_score = -math.inf
    for x in eligible:
        if scores[x] > best_score:
            best = x
            best_score = scores[x]
    return best


def _check_arrival_pending(state: SystemState, instance: Instance) -> None:
    if state.arrivals_used >= instance.budget:
        raise ValueError("no arrival decision remains: the budget is exhausted")


@functools.lru_cache(maxsize=None)
def _lambda_star_cached(
    params: TaskDpParams, pos: int, neg: int, in_flight: int, budget_left: int, tol: float
) -> float:
    return index_lambda_star(
        TaskDpState(pos, neg, in_flight, budget_left), params, tol=tol
    )


@functools.lru_cache(maxsize=8)
def _instance_params(instance: Instance) -> tuple[TaskDpParams, ...]:
    return tuple(
        TaskDpParams.from_instance(instance, x) for x in range(instance.num_tasks)
    )


def default_index_tol(instance: Instance) -> float:
    return (
        INDEX_TOL_EXACT
        if instance.budget <= LARGE_BUDGET_CUTOFF
        else INDEX_TOL_LARGE_BUDGET
    )


def index_choose(
    state: SystemState, instance: Instance, tol: float | None = None
) -> PolicyDecision:
    """Assign to the task with the greatest switching price lambda*.

    Each task is scored at its own (labels, in-flight, remaining-budget)
    state, treating every remaining arrival as available to it. Ties go to
    the lowest task index.
    """
    _check_arrival_pending(state, instance)
    if tol is None:
        tol = default_index_tol(instance)
    budget_left = instance.budget - state.arrivals_used
    all_params = _instance_params(instance)
    # tasks in identical (params, labels, in-flight) situations share a price
    local: dict[tuple, float] = {}
    scores = []
    for x, belief in enumerate(state.beliefs):
        a0, b0 = instance.priors[x]
        key = (
            all_params[x],
            int(round(belief.alpha - a0)),
            int(round(belief.beta - b0)),
            state.in_flight[x],
        )
        score = local.get(key)
        if score is None:
            score = _lambda_star_cached(*key, budget_left, tol)
            local[key] = score
        scores.append(score)
    task = _argmax_eligible(scores, _eligible(state, instance))
    return PolicyDecision(task=task, scores=tuple(scores))


@functools.lru_cache(maxsize=None)
def _okg_score_cached(alpha: float, beta: float, threshold: float) -> float:
    here = task_reward(TaskBelief(alpha, beta, threshold))
    if_pos = task_reward(TaskBelief(alpha + 1.0, beta, threshold))
    if_neg = task_reward(TaskBelief(alpha, beta + 1.0, threshold))
    return max(if_pos - here, if_neg - here)


def okg_choose(state: SystemState, instance: Instance) -> PolicyDecision:
    """Optimistic knowledge gradient: largest best-case one-label reward gain."""
    _check_arrival_pending(state, instance)
    scores = [
        _okg_score_cached(b.alpha, b.beta, b.threshold) for b in state.beliefs
    ]
    task = _argmax_eligible(scores, _eligible(state, instance))
    return PolicyDecision(task=task, scores=tuple(scores))


def thompson_choose(
    state: SystemState, instance: Instance, rng: np.random.Generator
) -> PolicyDecision:
    """Sample a world from the posterior; work on its most ambiguous task."""
    _check_arrival_pending(state, instance)
    alphas = np.array([b.alpha for b in state.beliefs])
    betas = np.array([b.beta for b in state.beliefs])
    draws = rng.beta(alphas, betas)
    scores = [
        -abs(float(draw) - b.threshold) for draw, b in zip(draws, state.beliefs)
    ]
    task = _argmax_eligible(scores, _eligible(state, instance))
    return PolicyDecision(task=task, scores=tuple(scores))


def ucb_tuned_choose(state: SystemState, instance: Instance) -> PolicyDecision:
    """UCB1-tuned adapted to labeling: ambiguity plus a tuned exploration bonus.

    Tasks with no labels yet score +inf and are taken first in index order.
    """
    _check_arrival_pending(state, instance)
    counts = []
    fractions = []
    for x, belief in enumerate(state.beliefs):
        a0, b0 = instance.priors[x]
        pos = int(round(belief.alpha - a0))
        neg = int(round(belief.beta - b0))
        counts.append(pos + neg)
        fractions.append(pos / (pos + neg) if pos + neg > 0 else 0.0)
    n_total = sum(counts)
    scores = []
    for n_x, p_hat in zip(counts, fractions):
        if n_x == 0:
            scores.append(math.inf)
            continue
        ambiguity = 1.0 - abs(2.0 * p_hat - 1.0)
        variance_proxy = p_hat * (1.0 - p_hat) + math.sqrt(2.0 * math.log(n_total) / n_x)
        bonus = math.sqrt(math.log(n_total) / n_x * min(0.25, variance_proxy))
        scores.append(ambiguity + bonus)
    task = _argmax_eligible(scores, _eligible(state, instance))
    return PolicyDecision(task=task, scores=tuple(scores))


def round_robin_choose(state: SystemState, instance: Instance) -> PolicyDecision:
    """Cycle through tasks by arrival count, skipping any at the worker cap."""
    _check_arrival_pending(state, instance)
    k = instance.num_tasks
    start = state.arrivals_used % k
    scores = [0.0] * k
    for offset in range(k):
        x = (start + offset) % k
        if state.in_flight[x] < instance.worker_cap:
            scores[x] = 1.0
            return PolicyDecision(task=x, scores=tuple(scores))
    return PolicyDecision(task=None, scores=tuple(scores))


def choose(
    kind: PolicyKind,
    state: SystemState,
    instance: Instance,
    rng: np.random.Generator | None = None,
) -> PolicyDecision:
    """Dispatch to a policy by kind; thompson requires an RNG."""
    if kind is PolicyKind.INDEX:
        return index_choose(state, instance)
    if kind is PolicyKind.OKG:
        return okg_choose(state, instance)
    if kind is PolicyKind.THOMPSON:
        if rng is None:
            raise ValueError("thompson_choose requires an RNG")
        return thompson_choose(state, instance, rng)
    if kind is PolicyKind.UCB_TUNED:
        return ucb_tuned_choose(state, instance)
    if kind is PolicyKind.ROUND_ROBIN:
        return round_robin_choose(state, instance)
    raise ValueError(f"unhandled policy kind {kind}")

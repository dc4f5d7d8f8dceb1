"""Brute-force exact values on tiny instances, for validating everything else.

With no deadline the embedded jump chain is a finite lattice over per-task
(positive labels, negative labels, workers in flight) triples plus the
remaining budget, so the Bayes-optimal value and the exact value of any
deterministic policy follow from memoized backward recursion. Feasible for a
couple of tasks and a handful of workers; the state-space guard refuses
anything larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .belief import TaskBelief, task_reward
from .chain import Instance, SystemState
from .policies import DETERMINISTIC_KINDS, PolicyKind, choose

__all__ = [
    "StateSpaceTooLargeError",
    "estimate_state_count",
    "exact_optimal_value",
    "exact_policy_value",
    "STATE_SPACE_LIMIT",
]

STATE_SPACE_LIMIT = 10_000_000


class StateSpaceTooLargeError(ValueError):
    """Instance too big for exhaustive recursion; carries the size estimate."""

    def __init__(self, estimate: int, limit: int) -> None:
        super().__init__(
            f"estimated joint state space of {estimate:,} states exceeds the "
            f"exact-oracle limit of {limit:,}"
        )
        self.estimate = estimate


@dataclass(frozen=True)
class JointDpState:
    """Per-task (pos, neg, in_flight) triples plus the remaining budget."""

    tasks: tuple[tuple[int, int, int], ...]
    budget_left: int


def estimate_state_count(instance: Instance) -> int:
    """Upper estimate of reachable joint states."""
    u_max = instance.budget
    cap = min(instance.worker_cap, u_max)
    per_task = sum(
        (u_max - w + 1) * (u_max - w + 2) // 2 for w in range(cap + 1)
    )
    per_task = max(per_task, 1)
    return per_task**instance.num_tasks * (u_max + 1)


def _check_size(instance: Instance) -> None:
    if not math.isinf(instance.horizon):
        raise ValueError("exact oracle values are defined for horizon=inf only")
    estimate = estimate_state_count(instance)
    if estimate > STATE_SPACE_LIMIT:
        raise StateSpaceTooLargeError(estimate, STATE_SPACE_LIMIT)


def _solve(instance: Instance, arrival_task) -> float:
    """Shared recursion; `arrival_task` returns the assignment or "optimal"."""
    r = instance.arrival_rate
    mu = instance.completion_rate
    cap = instance.worker_cap
    budget = instance.budget

    reward_memo: dict[tuple[int, int, int], float] = {}

    def reward(x: int, pos: int, neg: int) -> float:
        key = (x, pos, neg)
        if key not in reward_memo:
            a0, b0 = instance.priors[x]
            reward_memo[key] = task_reward(
                TaskBelief(a0 + pos, b0 + neg, instance.thresholds[x])
            )
        return reward_memo[key]

    memo: dict[tuple[tuple[tuple[int, int, int], ...], int], float] = {}

    def bump_worker(tasks, x):
        return tuple(
            (p, n, w + 1) if i == x else (p, n, w) for i, (p, n, w) in enumerate(tasks)
        )

    def complete(tasks, x, positive):
        p, n, w = tasks[x]
        new = (p + 1, n, w - 1) if positive else (p, n + 1, w - 1)
        return tuple(new if i == x else t for i, t in enumerate(tasks))

    def value(tasks, u):
        key = (tasks, u)
        if key in memo:
            return memo[key]
        total_in_flight = sum(w for _, _, w in tasks)
        if u == 0 and total_in_flight == 0:
            result = sum(reward(x, p, n) for x, (p, n, _) in enumerate(tasks))
            memo[key] = result
            return result
        if u > 0:
            q = r + mu * total_in_flight
            assignment = arrival_task(tasks, u)
            if assignment == "optimal":
                arrival_value = value(tasks, u - 1)  # skipping is allowed
                for z, (_, _, w) in enumerate(tasks):
                    if w < cap:
                        arrival_value = max(
                            arrival_value, value(bump_worker(tasks, z), u - 1)
                        )
            elif assignment is None:
                arrival_value = value(tasks, u - 1)
            else:
                arrival_value = value(bump_worker(tasks, assignment), u - 1)
            result = (r / q) * arrival_value
            for x, (p, n, w) in enumerate(tasks):
                if w == 0:
                    continue
                a0, b0 = instance.priors[x]
                p_pos = (a0 + p) / (a0 + p + b0 + n)
                result += (mu * w / q) * (
                    p_pos * value(complete(tasks, x, True), u)
                    + (1.0 - p_pos) * value(complete(tasks, x, False), u)
                )
        else:
            # budget exhausted: arrivals change nothing, condition on completions
            result = 0.0
            for x, (p, n, w) in enumerate(tasks):
                if w == 0:
                    continue
                a0, b0 = instance.priors[x]
                p_pos = (a0 + p) / (a0 + p + b0 + n)
                result += (w / total_in_flight) * (
                    p_pos * value(complete(tasks, x, True), 0)
                    + (1.0 - p_pos) * value(complete(tasks, x, False), 0)
                )
        memo[key] = result
        return result

    start = tuple((0, 0, 0) for _ in range(instance.num_tasks))
    return value(start, budget)


def exact_optimal_value(instance: Instance) -> float:
    """Bayes-optimal expected terminal reward, by exhaustive recursion."""
    _check_size(instance)
    return _solve(instance, lambda tasks, u: "optimal")


def exact_policy_value(instance: Instance, policy: PolicyKind) -> float:
    """Exact expected terminal reward of a deterministic policy."""
    if policy not in DETERMINISTIC_KINDS:
        raise ValueError(f"exact evaluation requires a deterministic policy, got {policy}")
    _check_size(instance)

    belief_memo: dict[tuple[int, int, int], TaskBelief] = {}

    def belief(x: int, pos: int, neg: int) -> TaskBelief:
        key = (x, pos, neg)
        if key not in belief_memo:
            a0, b0 = instance.priors[x]
            belief_memo[key] = TaskBelief(a0 + pos, b0 + neg, instance.thresholds[x])
        return belief_memo[key]

    def arrival_task(tasks, u):
        state = SystemState(
            beliefs=tuple(belief(x, p, n) for x, (p, n, _) in enumerate(tasks)),
            time=0.0,
            in_flight=tuple(w for _, _, w in tasks),
            arrivals_used=instance.budget - u,
        )
        return choose(policy, state, instance).task

    return _solve(instance, arrival_task)

"""Computable upper bound on the best achievable expected reward.

For any per-worker price lam >= 0, the sum of relaxed single-task values plus
the total price U*lam dominates the value of every feasible allocation
policy. The bound function is convex in lam, so a Fibonacci search over the
scalar price recovers (up to bracket tolerance) the tightest such bound; any
probed price already yields a valid bound, so search inexactness only costs
tightness, never validity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .chain import Instance
from .single_task_dp import TaskDpParams, solve_single_task

__all__ = [
    "BoundResult",
    "GapReport",
    "UnsupportedHorizonError",
    "b_of_lambda",
    "upper_bound",
    "optimality_gap",
]

DEFAULT_BRACKET_TOL = 1e-4


class UnsupportedHorizonError(ValueError):
    """The bound is computed for the no-deadline problem only."""


@dataclass(frozen=True)
class BoundResult:
    """Outcome of the scalar price search."""

    lambda_star: float
    bound_value: float
    evaluations: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class GapReport:
    """How far a simulated policy sits below the bound."""

    per_task_gap: float
    relative_gap: float
    ci_upper_exceeds_bound: bool


def _require_no_deadline(instance: Instance) -> None:
    if not math.isinf(instance.horizon):
        raise UnsupportedHorizonError(
            "the upper bound is only available for horizon=inf instances"
        )


def b_of_lambda(instance: Instance, lam: float) -> float:
    """Bound value at one price: sum of single-task optima plus U*lam.

    Tasks sharing a prior/threshold reuse a single solve.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    _require_no_deadline(instance)
    per_prior: dict[TaskDpParams, float] = {}
    total = 0.0
    for x in range(instance.num_tasks):
        params = TaskDpParams.from_instance(instance, x)
        if params not in per_prior:
            per_prior[params] = solve_single_task(params, lam).start_value
        total += per_prior[params]
    return total + instance.budget * lam


def _search_interval(instance: Instance) -> float:
    # one label moves a task reward by at most 0.5 when every threshold is
    # 0.5, and by at most 1 otherwise; no hire is worth more than that
    if all(d == 0.5 for d in instance.thresholds):
        return 0.5
    return 1.0


def upper_bound(instance: Instance, tol: float = DEFAULT_BRACKET_TOL) -> BoundResult:
    """Fibonacci search for the scalar price minimizing the bound.

    Keeps the best probed point (the bound may be flat over a price range),
    and always probes both endpoints. Deterministic: repeated calls agree
    bit-exactly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _require_no_deadline(instance)
    lo, hi = 0.0, _search_interval(instance)
    evaluations: list[tuple[float, float]] = []

    def probe(lam: float) -> float:
        value = b_of_lambda(instance, lam)
        evaluations.append((lam, value))
        return value

    probe(lo)
    probe(hi)

    # the bracket ends at width 3*(hi-lo)/fib[-1], so overshoot by 3x
    fib = [1.0, 1.0]
    while fib[-1] < 3.0 * (hi - lo) / tol:
        fib.append(fib[-1] + fib[-2])
    k = len(fib) - 1
    a, b = lo, hi
    if k >= 3:
        x1 = a + fib[k - 2] / fib[k] * (b - a)
        x2 = a + fib[k - 1] / fib[k] * (b - a)
        f1 = probe(x1)
        f2 = probe(x2)
        while k > 3:
            k -= 1
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = a + fib[k - 2] / fib[k] * (b - a)
                f1 = probe(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + fib[k - 1] / fib[k] * (b - a)
                f2 = probe(x2)

    best_lam, best_val = min(evaluations, key=lambda pair: (pair[1], pair[0]))
    return BoundResult(
        lambda_star=best_lam,
        bound_value=best_val,
        evaluations=tuple(evaluations),
    )


def optimality_gap(
    policy_mean: float,
    policy_ci_halfwidth: float,
    bound: float,
    num_tasks: int,
) -> GapReport:
    """Per-task and relative gap between a simulated mean and the bound.

    A CI upper edge above the bound would falsify the implementation; the
    report flags it rather than deciding significance here.
    """
    if bound < 0:
        raise ValueError("bound must be nonnegative")
    if num_tasks < 1:
        raise ValueError("num_tasks must be >= 1")
    if policy_ci_halfwidth < 0:
        raise ValueError("policy_ci_halfwidth must be nonnegative")
    return GapReport(
        per_task_gap=(bound - policy_mean) / num_tasks,
        relative_gap=(bound - policy_mean) / bound if bound > 0 else math.nan,
        ci_upper_exceeds_bound=policy_mean + policy_ci_halfwidth > bound,
    )

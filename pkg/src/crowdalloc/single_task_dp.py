"""Exact solver for the price-relaxed single-task hiring problem.

Relaxing the one-task-per-worker coupling with a per-worker price lam turns
the joint allocation problem into independent per-task problems: each task
decides, at every arrival, whether to hire the worker at cost lam or let it
go. With no deadline the task state is four small integers (positive labels,
negative labels, workers in flight, arrivals still available), so the optimal
value and hire rule are computed exactly by backward induction over that
lattice.

The per-state index lambda* is the price at which the optimal arrival action
flips from hire to skip; it drives both the upper bound and the index policy.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .belief import TaskBelief, task_reward
from .chain import Instance

__all__ = [
    "TaskDpParams",
    "TaskDpState",
    "SingleTaskDpTable",
    "NonMonotoneIndexError",
    "solve_single_task",
    "optimal_action",
    "index_lambda_star",
]

# hire tables are memoized per (params, lam); sized for budgets in the
# hundreds the packed tables stay a few MB each
_TABLE_CACHE_SIZE = 64


class NonMonotoneIndexError(RuntimeError):
    """The hire decision did not switch monotonically from hire to skip in lam."""


@dataclass(frozen=True)
class TaskDpParams:
    """Single-task problem data: prior, threshold, rates, budget, worker cap."""

    alpha0: float
    beta0: float
    threshold: float
    arrival_rate: float
    completion_rate: float
    budget: int
    worker_cap: int

    def __post_init__(self) -> None:
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise ValueError("prior parameters must be positive")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0, 1)")
        if not (self.arrival_rate > 0 and self.completion_rate > 0):
            raise ValueError("rates must be positive")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.worker_cap < 1:
            raise ValueError("worker_cap must be >= 1")

    @classmethod
    def from_instance(cls, instance: Instance, task: int) -> "TaskDpParams":
        a0, b0 = instance.priors[task]
        return cls(
            alpha0=a0,
            beta0=b0,
            threshold=instance.thresholds[task],
            arrival_rate=instance.arrival_rate,
            completion_rate=instance.completion_rate,
            budget=instance.budget,
            worker_cap=instance.worker_cap,
        )

    @property
    def cap_eff(self) -> int:
        """Workers in flight never exceed the budget, whatever the cap says."""
        return min(self.worker_cap, self.budget)


@dataclass(frozen=True)
class TaskDpState:
    """Integer offsets from the prior plus in-flight and remaining-budget counts."""

    pos: int
    neg: int
    in_flight: int
    budget_left: int

    def __post_init__(self) -> None:
        if min(self.pos, self.neg, self.in_flight, self.budget_left) < 0:
            raise ValueError("state components must be nonnegative integers")


def start_state(params: TaskDpParams) -> TaskDpState:
    return TaskDpState(0, 0, 0, params.budget)


@njit(cache=True)
def _backward_induction(
    reward: np.ndarray,
    alpha0: float,
    beta0: float,
    budget: int,
    cap: int,
    r: float,
    mu: float,
    lam: float,
    hire: np.ndarray,
    values: np.ndarray,
    store_values: bool,
):  # pragma: no cover - exercised via solve_single_task
    P = budget + 1
    v_prev = np.zeros((cap + 1, P, P))
    v_cur = np.zeros((cap + 1, P, P))

    # budget_left = 0 layer: no decisions remain
    for pos in range(P):
        for neg in range(P - pos):
            v_cur[0, pos, neg] = reward[pos, neg]
    for w in range(1, cap + 1):
        smax = budget - w
        for pos in range(smax + 1):
            a = alpha0 + pos
            for neg in range(smax - pos + 1):
                b = beta0 + neg
                p_pos = a / (a + b)
                v_cur[w, pos, neg] = p_pos * v_cur[w - 1, pos + 1, neg] + (
                    1.0 - p_pos
                ) * v_cur[w - 1, pos, neg + 1]
    if store_values:
        values[0] = v_cur

    for u in range(1, budget + 1):
        tmp = v_prev
        v_prev = v_cur
        v_cur = tmp
        smax_total = budget - u
        # no workers in flight: the next event is an arrival with certainty
        for pos in range(smax_total + 1):
            for neg in range(smax_total - pos + 1):
                skip_v = v_prev[0, pos, neg]
                hire_v = -lam + v_prev[1, pos, neg]
                if hire_v >= skip_v:
                    v_cur[0, pos, neg] = hire_v
                    hire[u, 0, pos, neg] = 1
                else:
                    v_cur[0, pos, neg] = skip_v
                    hire[u, 0, pos, neg] = 0
        # workers in flight: race between the arrival and a completion
        for w in range(1, min(cap, smax_total) + 1):
            q = r + mu * w
            p_arr = r / q
            p_done = mu * w / q
            smax = smax_total - w
            for pos in range(smax + 1):
                a = alpha0 + pos
                for neg in range(smax - pos + 1):
                    b = beta0 + neg
                    skip_v = v_prev[w, pos, neg]
                    h = 0
                    arr_v = skip_v
                    if w < cap:
                        hire_v = -lam + v_prev[w + 1, pos, neg]
                        if hire_v >= skip_v:
                            arr_v = hire_v
                            h = 1
                    p_pos = a / (a + b)
                    comp_v = p_pos * v_cur[w - 1, pos + 1, neg] + (
                        1.0 - p_pos
                    ) * v_cur[w - 1, pos, neg + 1]
                    v_cur[w, pos, neg] = p_arr * arr_v + p_done * comp_v
                    hire[u, w, pos, neg] = h
        if store_values:
            values[u] = v_cur

    return v_cur[0, 0, 0]


@functools.lru_cache(maxsize=32)
def _terminal_reward_grid(
    alpha0: float, beta0: float, threshold: float, budget: int
) -> np.ndarray:
    P = budget + 1
    grid = np.zeros((P, P))
    for pos in range(P):
        for neg in range(P - pos):
            grid[pos, neg] = task_reward(
                TaskBelief(alpha0 + pos, beta0 + neg, threshold)
            )
    grid.setflags(write=False)
    return grid


class SingleTaskDpTable:
    """Solved value/hire tables for one prior and one price lam.

    The hire rule is kept for every state (bit-packed); full values are kept
    only when requested since the simulator and bound need just the start
    value and the hire bits.
    """

    def __init__(
        self,
        params: TaskDpParams,
        lam: float,
        start_value: float,
        hire_bits: np.ndarray,
        values: np.ndarray | None,
    ) -> None:
        self.params = params
        self.lam = lam
        self.start_value = start_value
        self._hire_bits = hire_bits
        self._values = values
        self._P = params.budget + 1
        self._wdim = params.cap_eff + 1

    def _flat_index(self, state: TaskDpState) -> int:
        p = self.params
        if state.in_flight > p.cap_eff or state.budget_left > p.budget:
            raise ValueError(f"state {state} outside the table domain")
        if state.pos + state.neg + state.in_flight > p.budget - state.budget_left:
            raise ValueError(f"state {state} unreachable within budget {p.budget}")
        return (
            (state.budget_left * self._wdim + state.in_flight) * self._P + state.pos
        ) * self._P + state.neg

    def hire_at(self, state: TaskDpState) -> int:
        """Optimal arrival action at `state`: 1 = hire, 0 = skip."""
        idx = self._flat_index(state)
        byte = self._hire_bits[idx >> 3]
        return (int(byte) >> (7 - (idx & 7))) & 1

    def value_at(self, state: TaskDpState) -> float:
        if self._values is None:
            raise ValueError("table was solved without store_values=True")
        idx = self._flat_index(state)
        return float(self._values.reshape(-1)[idx])


def _solve(params: TaskDpParams, lam: float, store_values: bool) -> SingleTaskDpTable:
    P = params.budget + 1
    cap = params.cap_eff
    reward = _terminal_reward_grid(
        params.alpha0, params.beta0, params.threshold, params.budget
    )
    hire = np.zeros((P, cap + 1, P, P), dtype=np.uint8)
    if store_values:
        values = np.zeros((P, cap + 1, P, P))
    else:
        values = np.zeros((1, 1, 1, 1))
    start_value = _backward_induction(
        reward,
        params.alpha0,
        params.beta0,
        params.budget,
        cap,
        params.arrival_rate,
        params.completion_rate,
        lam,
        hire,
        values,
        store_values,
    )
    bits = np.packbits(hire.reshape(-1))
    return SingleTaskDpTable(
        params, lam, float(start_value), bits, values if store_values else None
    )


@functools.lru_cache(maxsize=_TABLE_CACHE_SIZE)
def _solve_cached(params: TaskDpParams, lam: float) -> SingleTaskDpTable:
    return _solve(params, lam, store_values=False)


def solve_single_task(
    params: TaskDpParams, lam: float, store_values: bool = False
) -> SingleTaskDpTable:
    """Solve the relaxed single-task problem at price lam >= 0.

    Backward induction over budget_left. Ties at the arrival decision break
    toward hire: with no discounting, hiring now ties hiring at the next
    arrival wherever deferral is free, so the hire indicator must mean "this
    task is still worth a worker at this price" for the index to rank tasks
    by investment value rather than by a vanishing deferral premium.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if store_values:
        return _solve(params, lam, store_values=True)
    return _solve_cached(params, float(lam))


def optimal_action(table: SingleTaskDpTable, state: TaskDpState) -> int:
    """Stored optimal arrival decision at `state` (1 = hire, 0 = skip)."""
    if state.budget_left == 0:
        # no arrivals remain; the table stores skip everywhere on this layer
        table._flat_index(state)  # domain check
        return 0
    return table.hire_at(state)


def _index_domain_hi(params: TaskDpParams) -> float:
    # a single label changes the classification reward by at most 0.5 when
    # d = 0.5 (rewards live in [0.5, 1]); by at most 1 in general
    return 0.5 if params.threshold == 0.5 else 1.0


def index_lambda_star(
    state: TaskDpState,
    params: TaskDpParams,
    tol: float = 1e-6,
    verify_grid: int = 0,
) -> float:
    """Price at which the optimal arrival action at `state` switches to skip.

    Bisection on the hire indicator, assuming the switch is monotone in lam.
    `verify_grid > 0` additionally scans that many equally spaced prices and
    raises NonMonotoneIndexError if the hire pattern is not a prefix of ones,
    surfacing any violation of the assumed structure instead of hiding it.
    Returns 0 when no budget remains or the task is at its worker cap.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if state.budget_left < 1 or state.in_flight >= params.worker_cap:
        return 0.0

    def hire_at(lam: float) -> int:
        return _solve_cached(params, lam).hire_at(state)

    hi = _index_domain_hi(params)
    if verify_grid > 0:
        pattern = [hire_at(hi * k / (verify_grid - 1)) for k in range(verify_grid)]
        for earlier, later in zip(pattern, pattern[1:]):
            if later > earlier:
                raise NonMonotoneIndexError(
                    f"hire pattern not monotone in lam at state {state}: {pattern}"
                )
    if not hire_at(0.0):
        return 0.0
    if hire_at(hi):
        raise NonMonotoneIndexError(
            f"hire still optimal at lam={hi} for state {state}; "
            "the switching structure does not hold"
        )
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hire_at(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)

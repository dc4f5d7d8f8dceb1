"""Beta-Bernoulli posterior arithmetic and the threshold-classification reward.

Each labeling task carries a Beta(alpha, beta) posterior over its unknown
positive-label rate theta. The requester classifies the task as positive or
negative depending on which side of the threshold d the posterior mass
favors, and earns the probability of being correct. All operations here are
pure functions on immutable values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

__all__ = [
    "Label",
    "TaskBelief",
    "reg_inc_beta",
    "task_reward",
    "total_reward",
    "posterior_update",
    "predicted_label",
]


class Label(enum.Enum):
    """A binary worker response."""

    NEGATIVE = 0
    POSITIVE = 1

    @classmethod
    def from_int(cls, value: int) -> "Label":
        return cls.POSITIVE if value else cls.NEGATIVE


@dataclass(frozen=True)
class TaskBelief:
    """Beta posterior (alpha, beta) plus classification threshold for one task."""

    alpha: float
    beta: float
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a positive finite real, got {self.alpha}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be a positive finite real, got {self.beta}")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


_CF_MAX_ITER = 500
_CF_EPS = 1e-15
_CF_TINY = 1e-300


def _betacf(x: float, a: float, b: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz iteration.

    Converges rapidly for x < (a + 1) / (a + b + 2); callers apply the
    symmetry transform outside that region.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction failed to converge for x={x}, a={a}, b={b}"
    )


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b) = P[Beta(a, b) <= x].

    Accurate to better than 1e-10 absolute over the full domain.
    """
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # symmetry switch keeps the continued fraction in its fast-converging region
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(x, a, b) / a
    return 1.0 - front * _betacf(1.0 - x, b, a) / b


def task_reward(belief: TaskBelief) -> float:
    """Expected reward max{P[theta > d], P[theta < d]} under the posterior."""
    below = reg_inc_beta(belief.threshold, belief.alpha, belief.beta)
    return max(below, 1.0 - below)


def total_reward(beliefs: list[TaskBelief] | tuple[TaskBelief, ...]) -> float:
    """Sum of per-task rewards across all tasks."""
    if len(beliefs) == 0:
        raise ValueError("total_reward requires at least one task belief")
    return sum(task_reward(b) for b in beliefs)


def posterior_update(belief: TaskBelief, label: Label) -> TaskBelief:
    """Fold one worker label into the posterior; adds 1 to alpha or beta."""
    if label is Label.POSITIVE:
        return replace(belief, alpha=belief.alpha + 1.0)
    return replace(belief, beta=belief.beta + 1.0)


def predicted_label(belief: TaskBelief) -> Label:
    """Classification the requester reports: positive iff P[theta > d] > P[theta < d].

    An exact tie resolves to negative so the rule is deterministic under
    finite-precision arithmetic.
    """
    below = reg_inc_beta(belief.threshold, belief.alpha, belief.beta)
    return Label.POSITIVE if 1.0 - below > below else Label.NEGATIVE

"""Budgeted crowd-labeling effort allocation.

Computes a price-relaxation upper bound on the Bayes-optimal expected reward,
runs the switching-price index policy and baselines in a continuous-time
simulator, and validates both against an exact brute-force oracle on tiny
instances.
"""

from .belief import (
    Label,
    TaskBelief,
    posterior_update,
    predicted_label,
    reg_inc_beta,
    task_reward,
    total_reward,
)
from .bound import BoundResult, GapReport, b_of_lambda, optimality_gap, upper_bound
from .chain import Event, Instance, SystemState, initial_state, is_terminal
from .datasets import LabeledDataset, TaskRecord, fit_prior_mom, load_dataset, split_holdout
from .oracle import exact_optimal_value, exact_policy_value
from .policies import PolicyDecision, PolicyKind, choose
from .simulator import (
    EpisodeResult,
    LabelSource,
    ReplicationStats,
    confidence_interval,
    run_episode,
    run_many,
    run_replications,
    validate_cap,
)
from .single_task_dp import (
    SingleTaskDpTable,
    TaskDpParams,
    TaskDpState,
    index_lambda_star,
    optimal_action,
    solve_single_task,
)

__version__ = "0.1.0"

__all__ = [
    "Label",
    "TaskBelief",
    "reg_inc_beta",
    "task_reward",
    "total_reward",
    "posterior_update",
    "predicted_label",
    "Instance",
    "SystemState",
    "Event",
    "initial_state",
    "is_terminal",
    "TaskDpParams",
    "TaskDpState",
    "SingleTaskDpTable",
    "solve_single_task",
    "optimal_action",
    "index_lambda_star",
    "BoundResult",
    "GapReport",
    "b_of_lambda",
    "upper_bound",
    "optimality_gap",
    "PolicyKind",
    "PolicyDecision",
    "choose",
    "LabelSource",
    "EpisodeResult",
    "ReplicationStats",
    "run_episode",
    "run_many",
    "run_replications",
    "validate_cap",
    "confidence_interval",
    "LabeledDataset",
    "TaskRecord",
    "load_dataset",
    "split_holdout",
    "fit_prior_mom",
    "exact_optimal_value",
    "exact_policy_value",
    "__version__",
]

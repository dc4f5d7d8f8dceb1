"""Shared builders for small test instances."""

from pathlib import Path

import pytest

from crowdalloc.chain import Instance

FIXTURE_DATASET = Path(__file__).parent / "data" / "replay_fixture.csv"


def tiny_instance(
    num_tasks: int,
    budget: int,
    priors=None,
    thresholds=None,
    worker_cap: int = 15,
    seed: int = 0,
) -> Instance:
    if priors is None:
        priors = ((1.0, 1.0),) * num_tasks
    if thresholds is None:
        thresholds = (0.5,) * num_tasks
    return Instance(
        num_tasks=num_tasks,
        budget=budget,
        priors=tuple(priors),
        thresholds=tuple(thresholds),
        worker_cap=worker_cap,
        master_seed=seed,
    )


@pytest.fixture
def fixture_dataset_path() -> Path:
    return FIXTURE_DATASET

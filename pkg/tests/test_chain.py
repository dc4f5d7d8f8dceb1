"""Tests for the continuous-time chain: rates, kernel, transitions, termination."""

import math

import numpy as np
import pytest

from conftest import tiny_instance
from crowdalloc.belief import Label, TaskBelief
from crowdalloc.chain import (
    ARRIVAL,
    COMPLETION,
    Event,
    Instance,
    SystemState,
    apply_event,
    event_distribution,
    event_rate,
    initial_state,
    is_terminal,
    replication_rng,
    sample_next_event,
)


def state_with(beliefs, in_flight, arrivals_used, time=0.0):
    return SystemState(
        beliefs=tuple(beliefs),
        time=time,
        in_flight=tuple(in_flight),
        arrivals_used=arrivals_used,
    )


class TestInstance:
    def test_defaults_follow_protocol(self):
        inst = Instance.with_defaults(10)
        assert inst.budget == 12
        assert inst.arrival_rate == 0.1
        assert inst.completion_rate == 0.4
        assert inst.worker_cap == 12
        assert inst.priors == ((1.0, 1.0),) * 10
        assert inst.thresholds == (0.5,) * 10
        assert math.isinf(inst.horizon)

    def test_default_budget_rounds_up(self):
        assert Instance.with_defaults(3).budget == 4

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"num_tasks": 0, "budget": 1, "priors": (), "thresholds": ()},
            {"num_tasks": 1, "budget": -1, "priors": ((1, 1),), "thresholds": (0.5,)},
            {"num_tasks": 1, "budget": 1, "priors": ((0, 1),), "thresholds": (0.5,)},
            {"num_tasks": 1, "budget": 1, "priors": ((1, 1),), "thresholds": (1.5,)},
            {"num_tasks": 2, "budget": 1, "priors": ((1, 1),), "thresholds": (0.5, 0.5)},
            {"num_tasks": 1, "budget": 1, "priors": ((1, 1),), "thresholds": (0.5,), "worker_cap": 0},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            Instance(**kwargs)


class TestEventRate:
    def test_idle_system_rate_is_arrival_rate(self):
        inst = tiny_instance(2, 3)
        assert event_rate(initial_state(inst), inst) == pytest.approx(0.1)

    def test_three_workers(self):
        inst = tiny_instance(2, 5)
        s = state_with([TaskBelief(1, 1), TaskBelief(1, 1)], [2, 1], 3)
        assert event_rate(s, inst) == pytest.approx(1.3)

    def test_one_worker(self):
        inst = tiny_instance(1, 2)
        s = state_with([TaskBelief(1, 1)], [1], 1)
        assert event_rate(s, inst) == pytest.approx(0.5)


class TestEventDistribution:
    def test_kernel_probabilities(self):
        inst = tiny_instance(1, 2)
        s = state_with([TaskBelief(1, 1)], [1], 1)
        p_arrival, completions = event_distribution(s, inst)
        assert p_arrival == pytest.approx(0.2, abs=1e-12)
        ((task, p_pos, p_neg),) = completions
        assert task == 0
        assert p_pos == pytest.approx(0.4, abs=1e-12)
        assert p_neg == pytest.approx(0.4, abs=1e-12)

    def test_probabilities_sum_to_one(self):
        inst = tiny_instance(3, 6)
        s = state_with(
            [TaskBelief(2, 1), TaskBelief(1, 3), TaskBelief(5, 5)], [2, 0, 1], 4
        )
        p_arrival, completions = event_distribution(s, inst)
        total = p_arrival + sum(p + q for _, p, q in completions)
        assert total == pytest.approx(1.0, abs=1e-12)


class TestSampleNextEvent:
    def test_idle_system_always_arrives(self):
        inst = tiny_instance(2, 3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            event = sample_next_event(initial_state(inst), inst, rng)
            assert event.kind == ARRIVAL
            assert event.gap > 0

    def test_terminal_state_rejected(self):
        inst = tiny_instance(1, 0)
        with pytest.raises(ValueError):
            sample_next_event(initial_state(inst), inst, np.random.default_rng(0))

    def test_empirical_frequencies_match_kernel(self):
        """10^5 draws against the analytic kernel, 3 standard errors."""
        inst = tiny_instance(1, 2)
        s = state_with([TaskBelief(1, 1)], [1], 1)
        rng = np.random.default_rng(123)
        n = 100_000
        counts = {"arrival": 0, "pos": 0, "neg": 0}
        for _ in range(n):
            event = sample_next_event(s, inst, rng)
            if event.kind == ARRIVAL:
                counts["arrival"] += 1
            elif event.label is Label.POSITIVE:
                counts["pos"] += 1
            else:
                counts["neg"] += 1
        for key, p in [("arrival", 0.2), ("pos", 0.4), ("neg", 0.4)]:
            se = math.sqrt(p * (1 - p) / n)
            assert abs(counts[key] / n - p) < 3 * se, key

    def test_label_override_hook(self):
        inst = tiny_instance(1, 2)
        s = state_with([TaskBelief(1, 1)], [1], 1)
        rng = np.random.default_rng(5)
        seen = []
        for _ in range(200):
            event = sample_next_event(s, inst, rng, label_for=lambda x: Label.POSITIVE)
            if event.kind == COMPLETION:
                seen.append(event.label)
        assert seen and all(label is Label.POSITIVE for label in seen)


class TestApplyEvent:
    def test_arrival_with_assignment(self):
        inst = tiny_instance(1, 2)
        s = initial_state(inst)
        nxt = apply_event(s, Event(ARRIVAL, gap=1.0), 0, inst)
        assert nxt.in_flight == (1,)
        assert nxt.arrivals_used == 1
        assert nxt.time == pytest.approx(1.0)
        assert nxt.beliefs == s.beliefs

    def test_arrival_without_assignment_still_burns_budget(self):
        inst = tiny_instance(1, 2)
        s = initial_state(inst)
        nxt = apply_event(s, Event(ARRIVAL, gap=1.0), None, inst)
        assert nxt.in_flight == (0,)
        assert nxt.arrivals_used == 1

    def test_arrival_after_budget_only_moves_time(self):
        inst = tiny_instance(1, 1)
        s = state_with([TaskBelief(1, 1)], [0], 1, time=2.0)
        # not terminal only if a worker is in flight; craft w=1 then arrival
        s = state_with([TaskBelief(1, 1)], [1], 1, time=2.0)
        nxt = apply_event(s, Event(ARRIVAL, gap=0.5), None, inst)
        assert nxt.arrivals_used == 1
        assert nxt.in_flight == (1,)
        assert nxt.time == pytest.approx(2.5)

    def test_completion_updates_posterior(self):
        inst = tiny_instance(1, 2)
        s = state_with([TaskBelief(1, 1)], [1], 1)
        nxt = apply_event(
            s, Event(COMPLETION, gap=0.3, task=0, label=Label.POSITIVE), None, inst
        )
        assert nxt.beliefs[0].alpha == 2
        assert nxt.beliefs[0].beta == 1
        assert nxt.in_flight == (0,)

    def test_horizon_crossing_cancels_workers(self):
        inst = Instance(
            num_tasks=2,
            budget=4,
            priors=((1, 1), (1, 1)),
            thresholds=(0.5, 0.5),
            horizon=10.0,
        )
        s = state_with([TaskBelief(1, 1), TaskBelief(2, 1)], [1, 2], 3, time=9.5)
        nxt = apply_event(
            s, Event(COMPLETION, gap=1.0, task=0, label=Label.POSITIVE), None, inst
        )
        assert nxt.in_flight == (0, 0)
        assert nxt.arrivals_used == 3
        assert nxt.beliefs == s.beliefs  # the completing label is canceled too
        assert nxt.time == pytest.approx(10.5)

    def test_contract_errors(self):
        inst = tiny_instance(2, 4, worker_cap=1)
        s = state_with([TaskBelief(1, 1), TaskBelief(1, 1)], [1, 0], 1)
        with pytest.raises(ValueError):
            apply_event(s, Event(ARRIVAL, gap=1.0), 0, inst)  # capped task
        with pytest.raises(ValueError):
            apply_event(s, Event(ARRIVAL, gap=1.0), 5, inst)  # out of range
        with pytest.raises(ValueError):
            apply_event(
                s,
                Event(COMPLETION, gap=1.0, task=1, label=Label.POSITIVE),
                None,
                inst,
            )  # no worker there
        with pytest.raises(ValueError):
            apply_event(
                s,
                Event(COMPLETION, gap=1.0, task=0, label=Label.POSITIVE),
                0,
                inst,
            )  # completions take no assignment


class TestIsTerminal:
    def test_budget_spent_nothing_in_flight(self):
        inst = tiny_instance(2, 2)
        s = state_with([TaskBelief(1, 1), TaskBelief(1, 1)], [0, 0], 2)
        assert is_terminal(s, inst)

    def test_worker_still_out(self):
        inst = tiny_instance(2, 2)
        s = state_with([TaskBelief(1, 1), TaskBelief(1, 1)], [1, 0], 2)
        assert not is_terminal(s, inst)

    def test_horizon_elapsed(self):
        inst = Instance(
            num_tasks=1, budget=5, priors=((1, 1),), thresholds=(0.5,), horizon=3.0
        )
        s = state_with([TaskBelief(1, 1)], [2], 1, time=3.0)
        assert is_terminal(s, inst)


class TestTrajectoryInvariants:
    def test_conservation_and_termination(self):
        """Labels + in-flight = assigned arrivals at every step; finite episodes."""
        inst = tiny_instance(3, 6, worker_cap=2)
        rng = np.random.default_rng(99)
        for _ in range(200):
            s = initial_state(inst)
            assigned = 0
            events = 0
            while not is_terminal(s, inst):
                event = sample_next_event(s, inst, rng)
                assignment = None
                if event.kind == ARRIVAL and s.arrivals_used < inst.budget:
                    eligible = [
                        x for x, w in enumerate(s.in_flight) if w < inst.worker_cap
                    ]
                    if eligible:
                        assignment = eligible[int(rng.integers(len(eligible)))]
                        assigned += 1
                s = apply_event(s, event, assignment, inst)
                events += 1
                assert events <= 10 * inst.budget + 10
                labels = sum(
                    (b.alpha - 1) + (b.beta - 1) for b in s.beliefs
                )
                assert labels + sum(s.in_flight) == pytest.approx(assigned)
            assert s.arrivals_used == inst.budget


class TestReplicationRng:
    def test_deterministic_and_order_independent(self):
        a = replication_rng(42, 3).random(5)
        b = replication_rng(42, 3).random(5)
        c = replication_rng(42, 4).random(5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

"""Tests for the index policy and the baseline allocation rules."""

import math

import numpy as np
import pytest

from conftest import tiny_instance
from crowdalloc.belief import TaskBelief
from crowdalloc.chain import SystemState, initial_state
from crowdalloc.policies import (
    PolicyKind,
    choose,
    index_choose,
    okg_choose,
    round_robin_choose,
    thompson_choose,
    ucb_tuned_choose,
)


def state_for(inst, beliefs=None, in_flight=None, arrivals_used=0):
    base = initial_state(inst)
    return SystemState(
        beliefs=tuple(beliefs) if beliefs is not None else base.beliefs,
        time=0.0,
        in_flight=tuple(in_flight) if in_flight is not None else base.in_flight,
        arrivals_used=arrivals_used,
    )


class TestIndexChoose:
    def test_single_task(self):
        inst = tiny_instance(1, 2)
        assert index_choose(initial_state(inst), inst).task == 0

    def test_fresh_beats_saturated(self):
        inst = tiny_instance(2, 1, priors=((1, 1), (50, 1)))
        decision = index_choose(state_for(inst), inst)
        assert decision.task == 0
        assert decision.scores[0] == pytest.approx(0.25, abs=2e-6)
        assert decision.scores[1] < 1e-3

    def test_tie_goes_to_lowest_index(self):
        inst = tiny_instance(3, 4)
        decision = index_choose(state_for(inst), inst)
        assert decision.task == 0
        assert decision.scores[0] == decision.scores[1] == decision.scores[2]

    def test_budget_exhausted_rejected(self):
        inst = tiny_instance(1, 1)
        with pytest.raises(ValueError):
            index_choose(state_for(inst, arrivals_used=1), inst)

    def test_capped_tasks_excluded(self):
        inst = tiny_instance(2, 4, worker_cap=1)
        decision = index_choose(state_for(inst, in_flight=(1, 0), arrivals_used=1), inst)
        assert decision.task == 1

    def test_all_capped_skips(self):
        inst = tiny_instance(2, 6, worker_cap=1)
        decision = index_choose(
            state_for(inst, in_flight=(1, 1), arrivals_used=2), inst
        )
        assert decision.task is None

    def test_permutation_equivariance(self):
        """Permuting tasks permutes the decision (tie-free beliefs)."""
        priors = ((1, 1), (4, 1), (2, 3))
        inst = tiny_instance(3, 4, priors=priors)
        decision = index_choose(state_for(inst), inst)
        perm = (2, 0, 1)  # task i of the permuted instance = task perm[i]
        inst_p = tiny_instance(3, 4, priors=tuple(priors[i] for i in perm))
        decision_p = index_choose(state_for(inst_p), inst_p)
        assert perm[decision_p.task] == decision.task
        assert decision_p.scores == tuple(decision.scores[i] for i in perm)

    def test_single_task_hires_until_budget(self):
        """With K=1 every arrival goes to the only task (cap permitting)."""
        inst = tiny_instance(1, 3, worker_cap=3)
        state = state_for(inst)
        for used in range(3):
            s = state_for(inst, in_flight=(used,), arrivals_used=used)
            assert index_choose(s, inst).task == 0

    def test_deterministic(self):
        inst = tiny_instance(2, 3, priors=((2, 1), (1, 2)))
        a = index_choose(state_for(inst), inst)
        b = index_choose(state_for(inst), inst)
        assert a == b


class TestOkgChoose:
    def test_fresh_vs_settled_scores(self):
        inst = tiny_instance(2, 2, priors=((1, 1), (10, 1)))
        decision = okg_choose(state_for(inst), inst)
        assert decision.task == 0
        assert decision.scores[0] == pytest.approx(0.25, abs=1e-9)
        assert decision.scores[1] == pytest.approx(2.0**-11, abs=1e-9)

    def test_single_task(self):
        inst = tiny_instance(1, 2)
        assert okg_choose(state_for(inst), inst).task == 0

    def test_tie_rule(self):
        inst = tiny_instance(4, 5)
        assert okg_choose(state_for(inst), inst).task == 0


class TestThompsonChoose:
    def test_single_task(self):
        inst = tiny_instance(1, 2)
        rng = np.random.default_rng(0)
        assert thompson_choose(state_for(inst), inst, rng).task == 0

    def test_given_draws_pick_most_ambiguous(self):
        class FixedBeta:
            def beta(self, a, b):
                return np.array([0.9, 0.51])

        inst = tiny_instance(2, 2)
        decision = thompson_choose(state_for(inst), inst, FixedBeta())
        assert decision.task == 1

    def test_concentrated_posterior_wins_most_draws(self):
        """Beta(100,100) hugs d=0.5, so it gets picked more often than Beta(1,1)."""
        inst = tiny_instance(2, 2, priors=((1, 1), (100, 100)))
        rng = np.random.default_rng(11)
        state = state_for(inst)
        picks = sum(
            1 for _ in range(10_000) if thompson_choose(state, inst, rng).task == 1
        )
        assert picks > 5000


class TestUcbTunedChoose:
    def test_all_unlabeled_forced_exploration(self):
        inst = tiny_instance(3, 4)
        decision = ucb_tuned_choose(state_for(inst), inst)
        assert decision.task == 0
        assert all(math.isinf(s) for s in decision.scores)

    def test_single_unlabeled_task_goes_first(self):
        inst = tiny_instance(2, 4)
        beliefs = (TaskBelief(3, 2, 0.5), TaskBelief(1, 1, 0.5))  # task 1 unlabeled
        decision = ucb_tuned_choose(
            state_for(inst, beliefs=beliefs, arrivals_used=3), inst
        )
        assert decision.task == 1

    def test_numeric_example(self):
        # task 0: 2+/2-, task 1: 4+/0-; n = 8 labels total
        inst = tiny_instance(2, 10)
        beliefs = (TaskBelief(3, 3, 0.5), TaskBelief(5, 1, 0.5))
        decision = ucb_tuned_choose(
            state_for(inst, beliefs=beliefs, arrivals_used=8), inst
        )
        assert decision.task == 0
        ln_n = math.log(8)
        v0 = 0.25 + math.sqrt(2 * ln_n / 4)
        s0 = 1.0 + math.sqrt(ln_n / 4 * min(0.25, v0))
        v1 = 0.0 + math.sqrt(2 * ln_n / 4)
        s1 = 0.0 + math.sqrt(ln_n / 4 * min(0.25, v1))
        assert decision.scores[0] == pytest.approx(s0, abs=1e-12)
        assert decision.scores[1] == pytest.approx(s1, abs=1e-12)


class TestRoundRobinChoose:
    def test_first_arrival(self):
        inst = tiny_instance(3, 6)
        assert round_robin_choose(state_for(inst), inst).task == 0

    def test_wraps_modulo(self):
        inst = tiny_instance(3, 6)
        decision = round_robin_choose(state_for(inst, arrivals_used=4), inst)
        assert decision.task == 1

    def test_skips_capped_cyclically(self):
        inst = tiny_instance(3, 9, worker_cap=1)
        state = state_for(inst, in_flight=(0, 1, 0), arrivals_used=1)
        assert round_robin_choose(state, inst).task == 2


class TestChooseDispatch:
    def test_all_kinds_dispatch(self):
        inst = tiny_instance(2, 3)
        rng = np.random.default_rng(0)
        state = state_for(inst)
        for kind in PolicyKind:
            decision = choose(kind, state, inst, rng)
            assert decision.task in (0, 1)

    def test_thompson_needs_rng(self):
        inst = tiny_instance(2, 3)
        with pytest.raises(ValueError):
            choose(PolicyKind.THOMPSON, state_for(inst), inst)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            PolicyKind.from_name("nope")

    def test_every_policy_assigns_when_possible(self):
        inst = tiny_instance(3, 5, worker_cap=2)
        rng = np.random.default_rng(3)
        state = state_for(inst, in_flight=(2, 2, 0), arrivals_used=4)
        for kind in PolicyKind:
            decision = choose(kind, state, inst, rng)
            assert decision.task == 2, kind

"""Ground oracle: propositionalizer, value iteration, simulation."""

from __future__ import annotations

import numpy as np
import pytest

from foplan.blocksworld import BWGeneratorConfig, generate_colored_bw
from foplan.domains import parse_problem
from foplan.errors import UniverseTooLargeError
from foplan.ground import (
    GroundState,
    greedy_ground_policy,
    ground_problem,
    ground_value_iteration,
    simulate_policy,
)

from helpers import ft

ONE_BLOCK = """
(domain one-block
  (objects a)
  (action pickup (params X) (cost 1)
    (choice pickupS (prob 1)
      (pre (on X table) (e) (not (on W X)))
      (eff (holding X) (not (on X table)))))
  (action putdown (params X) (cost 1)
    (choice putdownS (prob 1)
      (pre (holding X))
      (eff (on X table) (e) (not (on W X)))))
  (action done (cost 0) (choice doneS (prob 1) (pre) (eff)))
  (goal (reward 500) (on X table))
  (init (holding a))
)
"""

# two deterministic steps to the goal, unit costs
CHAIN = """
(domain chain
  (objects a)
  (action step1 (cost 1)
    (choice s (prob 1) (pre (p0)) (eff (p1))))
  (action step2 (cost 1)
    (choice s (prob 1) (pre (p1)) (eff (p2))))
  (action done (cost 0) (choice doneS (prob 1) (pre) (eff)))
  (goal (reward 500) (p2))
  (init (p0))
)
"""


class TestGroundProblem:
    def test_one_block_reachable_space(self):
        mdp = ground_problem(parse_problem(ONE_BLOCK))
        # held (initial) and on table (goal, absorbing)
        assert len(mdp.states) == 2
        assert len(mdp.goal) == 1
        assert mdp.initial not in mdp.goal
        goal_idx = next(iter(mdp.goal))
        assert mdp.actions[goal_idx] == []

    def test_goal_state_value_exact(self):
        mdp = ground_problem(parse_problem(ONE_BLOCK))
        v = ground_value_iteration(mdp)
        assert v[next(iter(mdp.goal))] == 500.0
        assert v[mdp.initial] == pytest.approx(499.0)  # one putdown, cost 1

    def test_chain_values(self):
        mdp = ground_problem(parse_problem(CHAIN))
        v = ground_value_iteration(mdp, 1e-9)
        assert v[mdp.initial] == pytest.approx(498.0)

    def test_state_cap(self):
        spec = generate_colored_bw(BWGeneratorConfig(3, (("red", 3),), seed=1))
        with pytest.raises(UniverseTooLargeError):
            ground_problem(spec, max_states=5)

    def test_three_block_bw_counts(self):
        spec = generate_colored_bw(BWGeneratorConfig(3, (("red", 3),), seed=1))
        mdp = ground_problem(spec)
        # 13 block arrangements plus 3 x 3 holding states
        assert len(mdp.states) == 22
        assert mdp.goal  # every one-tower state matches the one-color goal
        # goal states are exactly the single towers: 3! orderings
        assert len(mdp.goal) == 6

    def test_probabilities_sum_per_action(self):
        spec = generate_colored_bw(BWGeneratorConfig(2, (("red", 2),), seed=3))
        mdp = ground_problem(spec)
        for acts in mdp.actions:
            for a in acts:
                assert sum(p for p, _ in a.outcomes) == pytest.approx(1.0)


class TestGroundValueIteration:
    def test_matches_linear_policy_evaluation(self):
        spec = generate_colored_bw(BWGeneratorConfig(3, (("red", 3),), seed=5))
        mdp = ground_problem(spec)
        v = ground_value_iteration(mdp, 1e-12)
        policy = greedy_ground_policy(mdp, v)
        # evaluate the greedy policy by solving its linear system directly
        n = len(mdp.states)
        a_mat = np.eye(n)
        b = np.zeros(n)
        for i in range(n):
            if i in mdp.goal:
                b[i] = mdp.goal_reward
                continue
            act = policy[i]
            if act is None:
                b[i] = 0.0
                continue
            b[i] = -act.cost
            for p, j in act.outcomes:
                a_mat[i, j] -= mdp.gamma * p
        v_pi = np.linalg.solve(a_mat, b)
        assert np.max(np.abs(v_pi - v)) < 1e-6

    def test_values_bounded_by_goal_reward(self):
        spec = generate_colored_bw(BWGeneratorConfig(3, (("red", 2), ("blue", 1)), seed=7))
        mdp = ground_problem(spec)
        v = ground_value_iteration(mdp)
        assert np.all(v <= mdp.goal_reward + 1e-9)
        assert np.all(v >= 0.0)


class TestSimulate:
    def test_immediate_stop_scores_zero(self):
        mdp = ground_problem(parse_problem(CHAIN))
        stats = simulate_policy(mdp, lambda s: None, runs=10, seed=1)
        assert stats.mean == 0.0

    def test_deterministic_chain_scores_exactly(self):
        mdp = ground_problem(parse_problem(CHAIN))

        def decide(state: GroundState):
            acts = mdp.actions[mdp.index[state]]
            return acts[0].label if acts else None

        stats = simulate_policy(mdp, decide, runs=20, seed=9)
        assert stats.total_rewards == (498.0,) * 20

    def test_seed_reproducibility(self):
        spec = generate_colored_bw(BWGeneratorConfig(2, (("red", 2),), seed=3))
        mdp = ground_problem(spec)
        v = ground_value_iteration(mdp)
        policy = greedy_ground_policy(mdp, v)

        def decide(state: GroundState):
            act = policy[mdp.index[state]]
            return act.label if act else None

        a = simulate_policy(mdp, decide, runs=50, seed=42)
        b = simulate_policy(mdp, decide, runs=50, seed=42)
        assert a.total_rewards == b.total_rewards
        assert a.report() == b.report()

    def test_greedy_policy_mean_near_optimal_value(self):
        spec = generate_colored_bw(BWGeneratorConfig(2, (("red", 2),), seed=3))
        mdp = ground_problem(spec)
        v = ground_value_iteration(mdp, 1e-12)
        policy = greedy_ground_policy(mdp, v)

        def decide(state: GroundState):
            act = policy[mdp.index[state]]
            return act.label if act else None

        stats = simulate_policy(mdp, decide, runs=10_000, seed=11)
        assert abs(stats.mean - v[mdp.initial]) <= 3 * stats.stderr + 1e-9

"""Dynamic programming over abstract states, against the ground oracle."""

from __future__ import annotations

import pytest

from foplan.blocksworld import BWGeneratorConfig, generate_colored_bw
from foplan.domains import parse_problem
from foplan.fovi import (
    PlannerContext,
    SolverConfig,
    ValueFunction,
    backup,
    evaluate,
    evaluate_ground,
    extract_policy,
    goal_reward_value_function,
    lookup_bound,
    make_heuristic,
    normalize,
    reachable_closure,
    residual,
    run_value_iteration,
)
from foplan.ground import ground_problem, ground_value_iteration
from foplan.states import AbstractState, UNIVERSAL

from helpers import ft


def astate(pos: str, *negs: str) -> AbstractState:
    return AbstractState(ft(pos), (ft(n) for n in negs))


def bw(blocks: int, colors, seed: int):
    return generate_colored_bw(BWGeneratorConfig(blocks, colors, seed=seed))


class TestEvaluate:
    def test_reward_style_lookup(self):
        vf = ValueFunction([(astate("on(X,a)"), 500.0), (UNIVERSAL, 0.0)])
        z = astate("on(b,a) o on(a,table)")
        assert evaluate(vf, z) == 500.0

    def test_empty_default_zero(self):
        assert evaluate(ValueFunction(), astate("on(a,b)")) == 0.0

    def test_max_match_rule(self):
        vf = ValueFunction([(astate("on(X,a)"), 3.0), (UNIVERSAL, 7.0)])
        assert evaluate(vf, astate("on(b,a)")) == 7.0

    def test_lookup_bound_prefers_tightest(self):
        vf = ValueFunction([(astate("on(X,a)"), 3.0), (UNIVERSAL, 7.0)])
        assert lookup_bound(vf, astate("on(b,a)"), 500.0) == 3.0
        assert lookup_bound(vf, astate("holding(c)"), 500.0) == 7.0
        assert lookup_bound(ValueFunction(), astate("holding(c)"), 500.0) == 500.0

    def test_evaluate_ground_uses_satisfaction(self):
        vf = ValueFunction([(astate("on(X,a)", "holding(W)"), 9.0)])
        assert evaluate_ground(vf, ft("on(b,a)")) == 9.0
        assert evaluate_ground(vf, ft("on(b,a) o holding(c)")) == 0.0


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


class TestBackup:
    def test_goal_state_gets_exact_reward(self):
        model = parse_problem(CHAIN)
        ctx = PlannerContext(model)
        goal = ctx.intern(astate("p2"))
        vf = backup([goal], ctx, 1.0, ValueFunction())
        assert vf.entries == ((goal, 500.0),)

    def test_one_step_bellman(self):
        model = parse_problem(CHAIN)
        ctx = PlannerContext(model)
        near = ctx.intern(astate("p1"))
        h = goal_reward_value_function(model)
        vf = backup([near], ctx, 1.0, h)
        assert vf.entries[0][1] == pytest.approx(499.0)  # reward - cost(step2)

    def test_done_floors_at_zero(self):
        model = parse_problem(CHAIN)
        ctx = PlannerContext(model)
        stuck = ctx.intern(astate("p3"))  # no action applies except done
        vf = backup([stuck], ctx, 1.0, goal_reward_value_function(model))
        assert vf.entries[0][1] == 0.0

    def test_two_sweeps_match_ground_second_iterate(self):
        spec = bw(3, (("red", 3),), seed=5)
        ctx = PlannerContext(spec)
        closure = reachable_closure(ctx)
        v0 = goal_reward_value_function(spec)
        v1 = backup(closure, ctx, 1.0, v0)
        v2 = backup(closure, ctx, 1.0, v1)

        mdp = ground_problem(spec)
        import numpy as np

        v = np.full(len(mdp.states), mdp.goal_reward)
        for _ in range(2):
            new = np.zeros_like(v)
            for i in range(len(mdp.states)):
                if i in mdp.goal:
                    new[i] = mdp.goal_reward
                    continue
                best = 0.0
                for act in mdp.actions[i]:
                    q = -act.cost + sum(p * v[j] for p, j in act.outcomes)
                    best = max(best, q)
                new[i] = best
            v = new
        for i, gs in enumerate(mdp.states):
            assert evaluate_ground(v2, gs) == pytest.approx(v[i]), str(gs)


class TestNormalize:
    def test_merges_subsumed_equal_value(self):
        z1 = astate("on(X,a) o on(a,table)")
        z2 = astate("on(X2,a)")
        vf = normalize(ValueFunction([(z1, 5.0), (z2, 5.0)]))
        assert [s for s, _ in vf.entries] == [z2]

    def test_distinct_values_untouched(self):
        z1 = astate("on(X,a) o on(a,table)")
        z2 = astate("on(X2,a)")
        vf = normalize(ValueFunction([(z1, 5.0), (z2, 6.0)]))
        assert len(vf) == 2

    def test_renamed_duplicates_collapse(self):
        z1 = astate("holding(a)", "on(W,a)")
        z2 = astate("holding(a)", "on(V,a)")
        vf = normalize(ValueFunction([(z1, 5.0), (z2, 5.0)]))
        assert len(vf) == 1

    def test_idempotent(self):
        entries = [
            (astate("on(X,a) o on(a,table)"), 5.0),
            (astate("on(X2,a)"), 5.0),
            (astate("holding(b)"), 2.0),
            (UNIVERSAL, 5.0),
        ]
        once = normalize(ValueFunction(entries))
        twice = normalize(once)
        assert once.entries == twice.entries

    def test_preserves_ground_semantics(self):
        entries = [
            (astate("on(X,a) o on(a,table)"), 5.0),
            (astate("on(X2,a)"), 5.0),
            (astate("holding(c)"), 2.0),
        ]
        before = ValueFunction(entries)
        after = normalize(before)
        for d in (
            ft("on(b,a) o on(a,table)"),
            ft("on(b,a)"),
            ft("holding(c)"),
            ft("e"),
        ):
            assert evaluate_ground(before, d) == evaluate_ground(after, d)


class TestResidual:
    def test_identical_zero(self):
        vf = ValueFunction([(astate("p0"), 10.0)])
        assert residual(vf, vf, [astate("p0")]) == 0.0

    def test_single_state_difference(self):
        a = ValueFunction([(astate("p0"), 10.0)])
        b = ValueFunction([(astate("p0"), 7.5)])
        assert residual(a, b, [astate("p0")]) == 2.5


class TestExtractPolicy:
    def test_goal_maps_to_done(self):
        model = parse_problem(CHAIN)
        ctx = PlannerContext(model)
        goal = ctx.intern(astate("p2"))
        policy = extract_policy(goal_reward_value_function(model), [goal], ctx, 1.0)
        action, _ = policy.action_for(goal)
        assert action.name == "done"

    def test_unique_useful_action(self):
        model = parse_problem(CHAIN)
        ctx = PlannerContext(model)
        near = ctx.intern(astate("p1"))
        policy = extract_policy(goal_reward_value_function(model), [near], ctx, 1.0)
        action, _ = policy.action_for(near)
        assert action.name == "step2"

    def test_argmax_invariant_under_constant_shift(self):
        spec = bw(2, (("red", 2),), seed=3)
        ctx = PlannerContext(spec)
        res = run_value_iteration(spec, ctx=ctx)
        shifted = ValueFunction([(s, v - 123.0) for s, v in res.value])
        probe = res.policy.states()
        base = extract_policy(res.value, probe, ctx, 1.0)
        moved = extract_policy(shifted, probe, ctx, 1.0)
        for s in probe:
            if ctx.is_goal(s):
                continue
            assert base.action_for(s)[0].name == moved.action_for(s)[0].name


class TestValueIteration:
    def test_three_block_matches_oracle(self):
        spec = bw(3, (("red", 2), ("blue", 1)), seed=9)
        res = run_value_iteration(spec, SolverConfig.for_model(spec, epsilon=1e-6))
        assert res.converged
        mdp = ground_problem(spec)
        v_star = ground_value_iteration(mdp, 1e-9)
        for i, gs in enumerate(mdp.states):
            assert evaluate_ground(res.value, gs) == pytest.approx(
                v_star[i], abs=1e-3
            ), str(gs)

    def test_values_bounded_by_goal_reward(self):
        spec = bw(2, (("red", 2),), seed=3)
        res = run_value_iteration(spec)
        assert all(v <= spec.goal_reward + 1e-9 for _, v in res.value)


class TestMakeHeuristic:
    def test_zero_iterations_is_initializer(self):
        spec = bw(2, (("red", 2),), seed=3)
        h = make_heuristic(spec, 0)
        assert h.entries == ((UNIVERSAL, spec.goal_reward),)

    def test_goal_state_stays_exact(self):
        spec = bw(2, (("red", 2),), seed=3)
        ctx = PlannerContext(spec)
        h = make_heuristic(spec, 5, ctx=ctx)
        mdp = ground_problem(spec)
        for i in mdp.goal:
            assert evaluate_ground(h, mdp.states[i]) == spec.goal_reward

    def test_admissible_and_monotone(self):
        spec = bw(2, (("red", 2),), seed=3)
        mdp = ground_problem(spec)
        v_star = ground_value_iteration(mdp, 1e-9)
        previous = None
        for iters in (0, 2, 5):
            h = make_heuristic(spec, iters)
            values = [evaluate_ground(h, gs) for gs in mdp.states]
            for i, val in enumerate(values):
                assert val >= v_star[i] - 1e-9
            if previous is not None:
                for old, new in zip(previous, values):
                    assert new <= old + 1e-9
            previous = values

    def test_sweep_log_shrinks(self):
        spec = bw(3, (("red", 3),), seed=5)
        log = []
        make_heuristic(spec, 3, sweep_log=log)
        assert len(log) == 3
        for row in log:
            assert row.states_norm <= row.states_update
        assert any(row.states_norm < row.states_update for row in log)

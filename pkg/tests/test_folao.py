"""Heuristic search driver: expansion mechanics and oracle agreement."""

from __future__ import annotations

import pytest

from foplan.blocksworld import BWGeneratorConfig, generate_colored_bw
from foplan.domains import parse_problem
from foplan.folao import init_policy, policy_expansion, solve
from foplan.fovi import (
    PlannerContext,
    Policy,
    SolverConfig,
    evaluate_ground,
    make_heuristic,
    policy_decider,
    run_value_iteration,
)
from foplan.ground import ground_problem, ground_value_iteration, simulate_policy
from foplan.states import StateTable

# two stochastic actions from the start node: a1 reaches n1/n2, a2 reaches
# n2/n3, and a1 from n2 reaches n4/n5 (static r-facts select the edges)
EXPANSION_DEMO = """
(domain expansion-demo
  (objects n0 n1 n2 n3 n4 n5)
  (action a1 (params A B C)
    (choice a1first (prob 0.5)
      (pre (at A) (r1 A B C))
      (eff (at B) (r1 A B C)))
    (choice a1second (prob 0.5)
      (pre (at A) (r1 A B C))
      (eff (at C) (r1 A B C))))
  (action a2 (params A B C)
    (choice a2first (prob 0.5)
      (pre (at A) (r2 A B C))
      (eff (at B) (r2 A B C)))
    (choice a2second (prob 0.5)
      (pre (at A) (r2 A B C))
      (eff (at C) (r2 A B C))))
  (action done (cost 0) (choice doneS (prob 1) (pre) (eff)))
  (goal (reward 500) (at n4))
  (init (at n0) (r1 n0 n1 n2) (r2 n0 n2 n3) (r1 n2 n4 n5))
)
"""


def _at(ctx, states, node):
    for s in states:
        if any(f.name == "at" and f.args[0].name == node for f in s.positive):
            return s
    raise AssertionError(f"no state at {node}")


class TestPolicyExpansion:
    def setup_method(self):
        self.model = parse_problem(EXPANSION_DEMO)
        self.ctx = PlannerContext(self.model)
        self.z0 = self.ctx.initial_state()

    def _policy(self, assignments):
        entries = []
        for state, action_name in assignments:
            action = self.model.action(action_name)
            from foplan.actions import forward_applicable

            app = forward_applicable(state, action)[0]
            entries.append((state, action, app))
        return Policy.of(entries)

    def test_first_expansion(self):
        policy = self._policy([(self.z0, "a1")])
        g = StateTable()
        e, f, g = policy_expansion(policy, [self.z0], g, self.ctx)
        assert len(e) == 3  # z0 plus the two a1 successors
        assert len(f) == 2
        assert len(g) == 2
        assert e.find(self.z0) is not None
        assert g.find(self.z0) is None  # only generated states count as expanded

    def test_revision_reenters_expanded_successor(self):
        policy = self._policy([(self.z0, "a1")])
        g = StateTable()
        e, f, g = policy_expansion(policy, [self.z0], g, self.ctx)
        z1 = _at(self.ctx, e, "n1")
        z2 = _at(self.ctx, e, "n2")
        # the dynamic-programming step prefers a2 at z0; z2 keeps a1
        revised = self._policy([(self.z0, "a2"), (z2, "a1"), (z1, "done")])
        e2, f2, g = policy_expansion(revised, [self.z0], g, self.ctx)
        nodes = {
            f.args[0].name
            for s in e2
            for f in s.positive
            if f.name == "at"
        }
        assert nodes == {"n0", "n2", "n3", "n4", "n5"}
        # z1 is not visited by the best current partial policy
        assert e2.find(z1) is None
        assert len(f2) == 3  # n3, n4, n5 are newly discovered
        assert g.find(z1) is not None  # but it stays expanded

    def test_goal_only_initial_state(self):
        text = EXPANSION_DEMO.replace("(init (at n0)", "(init (at n4)")
        model = parse_problem(text)
        ctx = PlannerContext(model)
        z = ctx.initial_state()
        policy = init_policy([z], ctx)
        e, f, g = policy_expansion(policy, [z], StateTable(), ctx)
        assert len(f) == 0
        assert list(e) == [z]

    def test_init_policy_takes_canonically_first_action(self):
        policy = init_policy([self.z0], self.ctx)
        action, _ = policy.action_for(self.z0)
        assert action.name == "a1"  # alphabetically before a2 and done

    def test_done_policy_has_no_successors(self):
        policy = self._policy([(self.z0, "done")])
        e, f, g = policy_expansion(policy, [self.z0], StateTable(), self.ctx)
        assert len(f) == 0 and len(e) == 1


def bw(blocks, colors, seed):
    return generate_colored_bw(BWGeneratorConfig(blocks, colors, seed=seed))


class TestSolve:
    def test_goal_initial_state_one_iteration(self):
        spec = bw(2, (("red", 2),), seed=3)
        # rebuild the instance with a goal-satisfying tower as initial state
        from foplan.blocksworld import single_towers
        from foplan.domains import ProblemSpec
        from foplan.states import AbstractState, satisfies
        from foplan.terms import Fluent, FluentTerm, Var

        tower = next(d for d in single_towers(spec) if satisfies(d, spec.goal))
        top = next(
            f.args[0]
            for f in tower
            if f.name == "on"
            and not any(g.name == "on" and g.args[1] == f.args[0] for g in tower)
        )
        init = AbstractState(tower, [FluentTerm([Fluent("on", (Var("W"), top))])])
        spec2 = ProblemSpec(
            spec.name,
            spec.objects,
            spec.colors,
            spec.actions,
            spec.goal,
            spec.goal_reward,
            init,
            spec.gamma,
            spec.epsilon,
        )
        res = solve(spec2)
        assert res.converged
        assert res.iterations == 1
        ctx = PlannerContext(spec2)
        action, _ = res.policy.action_for(ctx.initial_state())
        assert action.name == "done"
        assert evaluate_ground(res.value, tower) == spec2.goal_reward

    def test_three_block_matches_oracle(self):
        spec = bw(3, (("red", 2), ("blue", 1)), seed=9)
        ctx = PlannerContext(spec)
        h = make_heuristic(spec, 20, ctx=ctx)
        res = solve(spec, SolverConfig.for_model(spec, epsilon=1e-4), h, ctx)
        assert res.converged
        mdp = ground_problem(spec)
        v_star = ground_value_iteration(mdp, 1e-9)
        got = evaluate_ground(res.value, mdp.states[mdp.initial])
        assert got == pytest.approx(v_star[mdp.initial], abs=1e-3)

    def test_trivial_heuristic_also_converges(self):
        spec = bw(2, (("red", 2),), seed=3)
        res = solve(spec, heuristic=make_heuristic(spec, 0))
        assert res.converged
        mdp = ground_problem(spec)
        v_star = ground_value_iteration(mdp, 1e-9)
        got = evaluate_ground(res.value, mdp.states[mdp.initial])
        assert got == pytest.approx(v_star[mdp.initial], abs=1e-3)

    def test_search_visits_fewer_states_than_full_sweep(self):
        spec = bw(3, (("red", 3),), seed=5)
        ctx = PlannerContext(spec)
        h = make_heuristic(spec, 20, ctx=ctx)
        res = solve(spec, heuristic=h, ctx=ctx)
        full = run_value_iteration(spec, ctx=PlannerContext(spec))
        assert res.converged and full.converged
        assert res.e_size <= full.state_count

    def test_policy_simulates_to_goal(self):
        spec = bw(3, (("red", 3),), seed=5)
        ctx = PlannerContext(spec)
        h = make_heuristic(spec, 20, ctx=ctx)
        res = solve(spec, heuristic=h, ctx=ctx)
        mdp = ground_problem(spec)
        stats = simulate_policy(mdp, policy_decider(res.policy, spec), 200, seed=4)
        v_star = ground_value_iteration(mdp, 1e-9)
        assert stats.mean > 0
        assert abs(stats.mean - v_star[mdp.initial]) <= 4 * stats.stderr + 1e-6

    def test_iteration_cap_flags_non_convergence(self):
        spec = bw(3, (("red", 3),), seed=5)
        res = solve(spec, SolverConfig.for_model(spec, max_outer=1))
        assert not res.converged
        assert res.iterations == 1

"""Heuristic search driver: policy expansion alternating with dynamic
programming until the best partial policy is closed and converged.

The expansion phase walks the current policy's nature's-choice successors
from the initial states, collecting the policy-visited set E, the fringe F
of states never expanded before, and the expanded-so-far set G.  The
dynamic-programming phase backs up E against the current value function
(initialized with an admissible heuristic) and re-extracts the greedy
policy.  Convergence additionally requires the extraction to confirm the
expanded policy: a revised policy must be re-expanded before the fringe
test means anything.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterable, Optional

from .domains import ProblemSpec
from .fovi import (
    PlannerContext,
    Policy,
    SolverConfig,
    SweepStats,
    ValueFunction,
    backup,
    extract_policy,
    lookup_bound,
    normalize,
)
from .states import AbstractState, StateTable

log = logging.getLogger(__name__)


@dataclass
class SearchFrontier:
    """The three reachability sets of one expansion plus bookkeeping for
    reconstructing how each state was first reached."""

    E: StateTable
    F: StateTable
    G: StateTable
    S0: list[AbstractState]
    parents: dict[AbstractState, tuple[AbstractState, str, str]]


@dataclass(frozen=True)
class SolveResult:
    policy: Policy
    value: ValueFunction
    iterations: int
    converged: bool
    residual: float
    e_size: int = 0
    f_size: int = 0
    g_size: int = 0
    sweep_log: tuple[SweepStats, ...] = ()


def init_policy(s0: Iterable[AbstractState], ctx: PlannerContext) -> Policy:
    """Each initial state mapped to its canonically first applicable
    action (the guaranteed 'done' fallback sorts first in practice)."""
    entries = []
    for state in s0:
        action, app = ctx.applicable(state)[0]
        entries.append((state, action, app))
    return Policy.of(entries)


def policy_expansion(
    policy: Policy,
    s0: list[AbstractState],
    g: StateTable,
    ctx: PlannerContext,
    parents: Optional[dict] = None,
) -> tuple[StateTable, StateTable, StateTable]:
    """One reachability pass under the given policy.

    Follows the policy's chosen action from the initial states: fringe
    states (not yet in G) are collected in F without being entered, while
    successors already expanded are re-entered and walked through.  Ends
    by folding F into both E and G.  Goal states are absorbing and a
    'done' choice ends accumulation, so neither contributes successors.
    """
    e_set = StateTable()
    f_set = StateTable()
    frontier = list(s0)
    while frontier:
        to_set = StateTable()
        for state in frontier:
            e_set.add_if_absent(state)
            if ctx.is_goal(state):
                continue
            chosen = policy.action_for(state)
            if chosen is None:
                chosen = ctx.applicable(state)[0]
            action, app = chosen
            if action.name == "done":
                continue
            for act, a, choice, succ in ctx.transitions(state):
                if act.name != action.name or a != app:
                    continue
                to_set.add_if_absent(succ)
                if parents is not None and succ not in parents and succ is not state:
                    parents[succ] = (state, action.name, choice.name)
        frontier = []
        for succ in to_set:
            if g.find(succ) is None:
                f_set.add_if_absent(succ)
            elif e_set.find(succ) is None:
                frontier.append(succ)
    for state in f_set:
        e_set.add_if_absent(state)
        g.add_if_absent(state)
    return e_set, f_set, g


def _bound_residual(
    v_new: ValueFunction,
    v_old: ValueFunction,
    probe: Iterable[AbstractState],
    default: float,
) -> float:
    """Sup-norm of the admissible-bound estimates over the probe set; the
    bound lookup makes the comparison insensitive to the goal-reward
    fallback entry that rides along inside heuristics."""
    worst = 0.0
    for state in probe:
        diff = abs(
            lookup_bound(v_new, state, default) - lookup_bound(v_old, state, default)
        )
        if diff > worst:
            worst = diff
    return worst


def _merge_value(base: ValueFunction, update: ValueFunction) -> ValueFunction:
    """Keyed update: entries of ``update`` replace the matching states of
    ``base``; everything else carries over."""
    updated = StateTable()
    for state, _ in update.entries:
        updated.add_if_absent(state)
    carried = [
        (s, v) for s, v in base.entries if updated.find(s) is None
    ]
    return ValueFunction(tuple(update.entries) + tuple(carried))


def _policy_still_greedy(
    policy: Policy,
    probe: Iterable[AbstractState],
    v: ValueFunction,
    ctx: PlannerContext,
    gamma: float,
    tolerance: float,
) -> bool:
    """Whether the policy used for the last expansion is still within
    ``tolerance`` of greedy under the updated values.  Declaring
    convergence right after a real policy revision would leave the revised
    policy unexpanded, so this guards the fringe test; equal-valued
    alternatives flapping in the argmax do not block it."""
    for state in probe:
        if ctx.is_goal(state):
            continue
        chosen = policy.action_for(state)
        if chosen is None:
            return False
        qs = ctx.q_values(state, v, gamma)
        best = max(q for _, _, q in qs)
        mine = [
            q
            for action, app, q in qs
            if action.name == chosen[0].name and app == chosen[1]
        ]
        if not mine or mine[0] < best - tolerance:
            return False
    return True


def _merge_policy(old: Policy, new: Policy) -> Policy:
    """New entries win; states only the old policy covers keep theirs (a
    re-entered expanded state must still know its last action)."""
    covered = StateTable()
    entries = list(new.entries)
    for state, _, _ in new.entries:
        covered.add_if_absent(state)
    for state, action, app in old.entries:
        if covered.find(state) is None:
            entries.append((state, action, app))
    return Policy.of(entries)


def solve(
    model: ProblemSpec,
    config: Optional[SolverConfig] = None,
    heuristic: Optional[ValueFunction] = None,
    ctx: Optional[PlannerContext] = None,
    deadline: Optional[float] = None,
) -> SolveResult:
    """Run the search to an epsilon-optimal partial policy.

    The caller provides an admissible heuristic (the goal-reward
    initializer when omitted).  Convergence requires an empty fringe, a
    residual at most epsilon, and a policy the last extraction confirmed;
    hitting the outer-iteration cap returns the best partial result
    flagged as not converged.
    """
    from .fovi import goal_reward_value_function

    ctx = ctx or PlannerContext(model)
    config = config or SolverConfig.for_model(model)
    v = heuristic if heuristic is not None else goal_reward_value_function(model)
    s0 = [ctx.initial_state()]
    policy = init_policy(s0, ctx)
    g = StateTable()
    parents: dict = {}
    backed = StateTable()
    sweep_log: list[SweepStats] = []
    r = float("inf")
    converged = False
    iterations = 0
    e_set = f_set = StateTable()
    while iterations < config.max_outer:
        iterations += 1
        e_set, f_set, g = policy_expansion(policy, s0, g, ctx, parents)
        probe = list(e_set)
        for state in probe:
            backed.add_if_absent(state)
        for _ in range(max(1, config.inner_sweeps)):
            t0 = time.perf_counter()
            update = backup(probe, ctx, config.gamma, v)
            t1 = time.perf_counter()
            update = normalize(update)
            t2 = time.perf_counter()
            sweep_log.append(
                SweepStats(iterations, len(probe), len(update), t1 - t0, t2 - t1)
            )
            v_next = _merge_value(v, update)
            r = _bound_residual(v_next, v, probe, model.goal_reward)
            v = v_next
        stable = _policy_still_greedy(
            policy, probe, v, ctx, config.gamma, config.epsilon
        )
        revised = extract_policy(v, probe, ctx, config.gamma)
        policy = _merge_policy(policy, revised)
        log.info(
            "iter=%d E=%d F=%d G=%d residual=%.6g",
            iterations,
            len(e_set),
            len(f_set),
            len(g),
            r,
        )
        if not f_set and r <= config.epsilon and stable:
            converged = True
            break
        if deadline is not None and time.perf_counter() > deadline:
            log.info("time limit reached after %d iterations", iterations)
            break
    final_value = ValueFunction(
        (s, val) for s, val in v.entries if backed.find(s) is not None
    )
    return SolveResult(
        policy=policy,
        value=final_value,
        iterations=iterations,
        converged=converged,
        residual=r,
        e_size=len(e_set),
        f_size=len(f_set),
        g_size=len(g),
        sweep_log=tuple(sweep_log),
    )

"""Explicit ground-state semantics: the desk-scale truth.

Propositionalizes a problem by forward closure from its ground initial
state, runs classical value iteration on the result, and evaluates
policies by seeded Monte-Carlo simulation.  Everything here is
independent of the lifted solver so it can serve as its oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .domains import ProblemSpec
from .errors import UniverseTooLargeError, ValidationError
from .states import GroundUniverse, satisfies
from .terms import (
    Const,
    ExtVar,
    Fluent,
    FluentTerm,
    Term,
    ac1_match,
    apply_pattern,
    apply_substitution,
)

_U1 = ExtVar("U1")
_U2 = ExtVar("U2")

DEFAULT_STATE_CAP = 200_000
DEFAULT_HORIZON = 1000
RNG_ALGORITHM = "PCG64"


@dataclass(frozen=True)
class GroundState:
    """A finite set of ground fluents."""

    fluents: frozenset[Fluent]

    @staticmethod
    def of(term: FluentTerm) -> "GroundState":
        if not term.is_ground():
            raise ValidationError(f"ground state from non-ground term: {term}")
        if term.has_duplicate_fluent():
            raise ValidationError(f"ground state repeats a fluent: {term}")
        return GroundState(frozenset(term.fluents))

    @property
    def term(self) -> FluentTerm:
        return FluentTerm(self.fluents)

    def __str__(self) -> str:
        return "{" + ", ".join(sorted(str(f) for f in self.fluents)) + "}"


GroundActionLabel = tuple[str, tuple[Const, ...]]


@dataclass(frozen=True)
class GroundAction:
    """One ground action instance at one state: label, cost, outcome
    distribution over successor state indices."""

    label: GroundActionLabel
    cost: float
    outcomes: tuple[tuple[float, int], ...]


@dataclass
class GroundMDP:
    """Reachable fragment of the induced MDP.

    The implicit 'done' action ends reward accumulation and is available
    everywhere; goal states are absorbing and carry the goal reward.
    """

    states: list[GroundState]
    index: dict[GroundState, int]
    actions: list[list[GroundAction]]
    goal: set[int]
    goal_reward: float
    gamma: float
    initial: int

    def is_goal(self, i: int) -> bool:
        return i in self.goal


def _ground_applicabilities(state_term: FluentTerm, action) -> list:
    """All embeddings of the action's positive precondition whose negative
    preconditions have no instance in the ground state."""
    pre = action.precondition
    out = []
    for theta in ac1_match(pre.positive, state_term, ext=_U1):
        blocked = False
        for np_ in pre.negatives:
            inst = apply_substitution(np_, theta)
            if ac1_match(inst, state_term, ext=_U2, first_only=True):
                blocked = True
                break
        if not blocked:
            out.append(theta)
    return out


def ground_problem(
    model: ProblemSpec,
    universe: Optional[GroundUniverse] = None,
    max_states: int = DEFAULT_STATE_CAP,
) -> GroundMDP:
    """Reachable-state ground MDP from the problem's ground initial state.

    Applicability and effects are computed by matching the schemata
    against each ground state directly; a provided universe is checked as
    a sanity bound on the fluents that may appear.
    """
    init_term = model.init_ground()
    if init_term is None:
        raise ValidationError("grounding needs a ground initial state")
    allowed: Optional[set[Fluent]] = None
    if universe is not None:
        allowed = set(universe.ground_fluents())
    work_actions = [a for a in model.actions if a.name != "done"]

    states: list[GroundState] = []
    index: dict[GroundState, int] = {}
    goal: set[int] = set()

    def intern(term: FluentTerm) -> int:
        gs = GroundState.of(term)
        got = index.get(gs)
        if got is not None:
            return got
        if allowed is not None and not set(gs.fluents) <= allowed:
            extra = set(gs.fluents) - allowed
            raise UniverseTooLargeError(
                f"reached fluents outside the universe: {sorted(map(str, extra))}"
            )
        if len(states) >= max_states:
            raise UniverseTooLargeError(f"more than {max_states} reachable states")
        index[gs] = len(states)
        states.append(gs)
        if satisfies(term, model.goal):
            goal.add(index[gs])
        return index[gs]

    initial = intern(init_term)
    actions: list[list[GroundAction]] = []
    frontier = [initial]
    explored = 0
    while explored < len(states):
        i = explored
        explored += 1
        term = states[i].term
        if i in goal:
            actions.append([])
            continue
        acts: list[GroundAction] = []
        seen: set[tuple] = set()
        for schema in work_actions:
            for theta in _ground_applicabilities(term, schema):
                params = tuple(theta.term(p) for p in schema.params)
                outcomes = []
                for choice in schema.choices:
                    succ = apply_pattern(choice.eff.positive, _U1, theta)
                    if succ.has_duplicate_fluent():
                        raise ValidationError(
                            f"ground successor repeats a fluent under "
                            f"{schema.name}{params}: {succ}"
                        )
                    outcomes.append((choice.probability, intern(succ)))
                key = (schema.name, params, tuple(outcomes))
                if key in seen:
                    continue
                seen.add(key)
                acts.append(
                    GroundAction((schema.name, params), schema.cost, tuple(outcomes))
                )
        actions.append(acts)
    return GroundMDP(
        states=states,
        index=index,
        actions=actions,
        goal=goal,
        goal_reward=model.goal_reward,
        gamma=model.gamma,
        initial=initial,
    )


def ground_value_iteration(
    mdp: GroundMDP, epsilon: float = 1e-9, max_sweeps: int = 100_000
) -> np.ndarray:
    """Synchronous Bellman iteration to a sup-norm residual below
    ``epsilon``; goal states stay pinned at the goal reward and the
    implicit stop action floors every value at zero."""
    n = len(mdp.states)
    v = np.full(n, mdp.goal_reward, dtype=float)
    for i in mdp.goal:
        v[i] = mdp.goal_reward
    for _ in range(max_sweeps):
        new = np.zeros(n)
        for i in range(n):
            if i in mdp.goal:
                new[i] = mdp.goal_reward
                continue
            best = 0.0
            for act in mdp.actions[i]:
                q = -act.cost + mdp.gamma * sum(p * v[j] for p, j in act.outcomes)
                if q > best:
                    best = q
            new[i] = best
        residual = float(np.max(np.abs(new - v))) if n else 0.0
        v = new
        if residual <= epsilon:
            break
    return v


def greedy_ground_policy(mdp: GroundMDP, values: np.ndarray) -> list[Optional[GroundAction]]:
    """The argmax action per state under ``values``; None means stop."""
    out: list[Optional[GroundAction]] = []
    for i in range(len(mdp.states)):
        if i in mdp.goal:
            out.append(None)
            continue
        best, best_q = None, 0.0
        for act in mdp.actions[i]:
            q = -act.cost + mdp.gamma * sum(p * values[j] for p, j in act.outcomes)
            if q > best_q + 1e-12:
                best, best_q = act, q
        out.append(best)
    return out


@dataclass(frozen=True)
class SimulationStats:
    """Aggregate of seeded policy rollouts."""

    runs: int
    total_rewards: tuple[float, ...]
    seed: int
    horizon: int
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def mean(self) -> float:
        return sum(self.total_rewards) / self.runs

    @property
    def minimum(self) -> float:
        return min(self.total_rewards)

    @property
    def maximum(self) -> float:
        return max(self.total_rewards)

    @property
    def stderr(self) -> float:
        if self.runs < 2:
            return 0.0
        m = self.mean
        var = sum((x - m) ** 2 for x in self.total_rewards) / (self.runs - 1)
        return math.sqrt(var / self.runs)

    def report(self) -> str:
        return (
            f"total-av-reward={self.mean:.2f} runs={self.runs} "
            f"min={self.minimum:.2f} max={self.maximum:.2f} "
            f"stderr={self.stderr:.3f} seed={self.seed} rng={self.rng_algorithm}"
        )


Decide = Callable[[GroundState], Optional[GroundActionLabel]]


def simulate_policy(
    mdp: GroundMDP,
    decide: Decide,
    runs: int,
    horizon: int = DEFAULT_HORIZON,
    seed: int = 0,
) -> SimulationStats:
    """Seeded rollouts of a decision rule over the ground MDP.

    Each run accrues action costs until it enters a goal state (collecting
    the goal reward and ending), stops (the decision rule returns None or
    an unavailable action, read as 'done'), or hits the horizon.  Per-run
    generators derive from the seed, so results are reproducible and
    order-independent.
    """
    children = np.random.SeedSequence(seed).spawn(runs)
    totals: list[float] = []
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        i = mdp.initial
        total = 0.0
        for _ in range(horizon):
            if mdp.is_goal(i):
                total += mdp.goal_reward
                break
            label = decide(mdp.states[i])
            act = None
            if label is not None:
                act = next((a for a in mdp.actions[i] if a.label == label), None)
            if act is None:
                break
            total -= act.cost
            probs = [p for p, _ in act.outcomes]
            pick = rng.choice(len(probs), p=probs)
            i = act.outcomes[pick][1]
        totals.append(total)
    return SimulationStats(runs, tuple(totals), seed, horizon)


def universe_from_problem(model: ProblemSpec, fluent_cap: int = 24) -> GroundUniverse:
    """A generic enumeration basis: every declared object plus every
    constant mentioned anywhere, over every fluent signature in use."""
    consts: set[str] = {o.name for o in model.objects}
    arities: dict[str, int] = {}

    def see(term: FluentTerm) -> None:
        for f in term:
            arities[f.name] = f.arity
            for a in f.args:
                if isinstance(a, Const):
                    consts.add(a.name)

    for st in (model.goal, model.init):
        see(st.positive)
        for n in st.negatives:
            see(n)
    for a in model.actions:
        for c in a.choices:
            for st in (c.pre, c.eff):
                see(st.positive)
                for n in st.negatives:
                    see(n)
    domain = sorted(consts)
    return GroundUniverse.of(
        {name: [domain] * arity for name, arity in arities.items()},
        fluent_cap=fluent_cap,
    )

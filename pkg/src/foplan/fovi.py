"""Value iteration over abstract states.

A value function is a finite list of (abstract state, value) pairs.
Reading a value out of it comes in three flavors:

* ``evaluate`` (the reported semantics): maximum over the entries whose
  state subsumes the queried one, defaulting to zero;
* ``evaluate_ground``: the same over entries satisfied by a ground state;
* ``lookup_bound`` (the Bellman lookup): minimum over the subsuming
  entries, defaulting to the goal reward.  Every subsuming entry's value
  is an upper bound on the optimal value of the queried state's members,
  so the minimum is the tightest admissible estimate and keeps backups
  both admissible and informative even while a very general entry (like
  the goal-reward initializer) is still around.

Backups replace values state by state; normalization afterwards merges
equal-valued entries related by subsumption, which is what keeps symbolic
iteration from drowning in redundant copies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .actions import ActionSchema, Applicability, forward_applicable, successor
from .domains import ProblemSpec
from .errors import NoApplicableActionError, UniverseTooLargeError, ValidationError
from .ground import GroundState
from .states import (
    AbstractState,
    StateTable,
    UNIVERSAL,
    canonical_state,
    satisfies,
    state_key,
    subsumes,
)
from .terms import Const, FluentTerm, Var

CLOSURE_STATE_CAP = 200_000


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the dynamic-programming and search drivers."""

    gamma: float = 1.0
    epsilon: float = 1e-4
    heuristic_iterations: int = 20
    max_iterations: int = 1000
    max_outer: int = 500
    inner_sweeps: int = 1

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValidationError(f"gamma must lie in (0,1], got {self.gamma}")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.heuristic_iterations < 0:
            raise ValidationError("heuristic iterations must be nonnegative")

    @staticmethod
    def for_model(model: ProblemSpec, **overrides) -> "SolverConfig":
        base = {"gamma": model.gamma, "epsilon": model.epsilon}
        base.update({k: v for k, v in overrides.items() if v is not None})
        return SolverConfig(**base)


@dataclass(frozen=True)
class SweepStats:
    """One dynamic-programming sweep: sizes before/after normalization and
    the time spent in each phase (the telemetry row format)."""

    iteration: int
    states_update: int
    states_norm: int
    update_time: float
    norm_time: float

    CSV_HEADER = "iteration,s_update,s_norm,update_time,norm_time"

    def csv_row(self) -> str:
        return (
            f"{self.iteration},{self.states_update},{self.states_norm},"
            f"{self.update_time:.6f},{self.norm_time:.6f}"
        )


class ValueFunction:
    """An immutable list of (abstract state, value) entries.

    Lookups are indexed: an entry with a ground positive part can only
    subsume states sharing that part exactly (at equal size) or larger
    states, so ground entries bucket by their positive term while the few
    lifted entries are scanned with cheap rejects.
    """

    __slots__ = ("entries", "_ground_by_positive", "_ground_smaller", "_lifted")

    def __init__(self, entries: Iterable[tuple[AbstractState, float]] = ()):
        object.__setattr__(self, "entries", tuple(entries))
        by_pos: dict[FluentTerm, list[int]] = {}
        smaller: dict[int, list[int]] = {}
        lifted: list[int] = []
        for i, (s, _) in enumerate(self.entries):
            if s.positive.is_ground():
                by_pos.setdefault(s.positive, []).append(i)
                smaller.setdefault(len(s.positive), []).append(i)
            else:
                lifted.append(i)
        object.__setattr__(self, "_ground_by_positive", by_pos)
        object.__setattr__(self, "_ground_smaller", smaller)
        object.__setattr__(self, "_lifted", tuple(lifted))

    def __setattr__(self, *_a):
        raise AttributeError("ValueFunction is immutable")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def _candidates(self, psize: int, exact: Optional[FluentTerm]) -> Iterable[int]:
        if exact is not None:
            yield from self._ground_by_positive.get(exact, ())
        for size, indices in self._ground_smaller.items():
            if size < psize:
                yield from indices
        yield from self._lifted

    def subsuming_values(self, state: AbstractState) -> Iterable[float]:
        """Values of every entry whose state subsumes ``state``."""
        psize = len(state.positive)
        counts = state.positive.name_counts()
        exact = state.positive if state.positive.is_ground() else None
        if exact is None:
            # lifted query: fall back to scanning every entry
            candidates = range(len(self.entries))
        else:
            candidates = self._candidates(psize, exact)
        for i in candidates:
            s, v = self.entries[i]
            if s == state:  # reflexivity, no witness search needed
                yield v
                continue
            if len(s.positive) > psize:
                continue
            if any(
                c > counts.get(n, 0) for n, c in s.positive.name_counts().items()
            ):
                continue
            if subsumes(state, s) is not None:
                yield v

    def satisfied_values(self, ground: FluentTerm) -> Iterable[float]:
        psize = len(ground)
        counts = ground.name_counts()
        for s, v in self.entries:
            if len(s.positive) > psize:
                continue
            if any(
                c > counts.get(n, 0) for n, c in s.positive.name_counts().items()
            ):
                continue
            if satisfies(ground, s):
                yield v


def evaluate(vf: ValueFunction, state: AbstractState) -> float:
    """Reported value of an abstract state: the maximum over matching
    entries, zero when nothing matches."""
    return max(vf.subsuming_values(state), default=0.0)


def evaluate_ground(vf: ValueFunction, ground: FluentTerm | GroundState) -> float:
    """Reported value of a ground state."""
    term = ground.term if isinstance(ground, GroundState) else ground
    return max(vf.satisfied_values(term), default=0.0)


def lookup_bound(vf: ValueFunction, state: AbstractState, default: float) -> float:
    """Tightest upper bound the entries assign to the state's members."""
    return min(vf.subsuming_values(state), default=default)


class PlannerContext:
    """Model access with the caches every solver phase shares: state
    interning (identity is mutual subsumption), applicability sets,
    outcome successors, and goal membership."""

    def __init__(self, model: ProblemSpec):
        self.model = model
        self._interned = StateTable()
        self._canonical: dict[AbstractState, AbstractState] = {}
        self._apps: dict[AbstractState, tuple] = {}
        self._transitions: dict[AbstractState, tuple] = {}
        self._goal: dict[AbstractState, bool] = {}
        self._work_actions = [a for a in model.actions if a.name != "done"]
        done = model.done_action
        if not done.precondition.positive.is_empty() or done.precondition.negatives:
            raise ValidationError("the 'done' action must have an empty precondition")
        self.done = done

    def intern(self, state: AbstractState) -> AbstractState:
        got = self._canonical.get(state)
        if got is None:
            got = self._interned.add_if_absent(canonical_state(state))
            self._canonical[state] = got
        return got

    def initial_state(self) -> AbstractState:
        return self.intern(self.model.init)

    def is_goal(self, state: AbstractState) -> bool:
        got = self._goal.get(state)
        if got is None:
            got = subsumes(state, self.model.goal) is not None
            self._goal[state] = got
        return got

    def reward(self, state: AbstractState) -> float:
        return self.model.goal_reward if self.is_goal(state) else 0.0

    def applicable(self, state: AbstractState) -> tuple:
        """(action, applicability) pairs, the 'done' fallback included."""
        got = self._apps.get(state)
        if got is None:
            pairs = []
            for action in self.model.actions:
                for app in forward_applicable(state, action):
                    pairs.append((action, app))
            if not any(a.name == "done" for a, _ in pairs):
                raise NoApplicableActionError(f"no action applies to {state}")
            got = tuple(pairs)
            self._apps[state] = got
        return got

    def transitions(self, state: AbstractState) -> tuple:
        """(action, applicability, choice, successor) per stochastic
        outcome; empty for goal states (absorbing) and never including
        'done' (its only effect is to stop reward accumulation)."""
        got = self._transitions.get(state)
        if got is None:
            if self.is_goal(state):
                got = ()
            else:
                entries = []
                for action, app in self.applicable(state):
                    if action.name == "done":
                        continue
                    for choice in action.choices:
                        entries.append(
                            (
                                action,
                                app,
                                choice,
                                self.intern(successor(state, choice, app)),
                            )
                        )
                got = tuple(entries)
            self._transitions[state] = got
        return got

    def q_values(
        self,
        state: AbstractState,
        v_prev: ValueFunction,
        gamma: float,
        lookup_memo: Optional[dict[AbstractState, float]] = None,
    ) -> list[tuple[ActionSchema, Applicability, float]]:
        """Q(state, action, applicability) for every applicable pair, with
        successor values read as admissible bounds from ``v_prev``.  A
        shared memo amortizes the lookups across one sweep."""
        default = self.model.goal_reward
        by_app: dict[tuple, float] = {}
        if lookup_memo is None:
            lookup_memo = {}
        for action, app, choice, succ in self.transitions(state):
            val = lookup_memo.get(succ)
            if val is None:
                val = lookup_bound(v_prev, succ, default)
                lookup_memo[succ] = val
            key = (action.name, app)
            by_app[key] = by_app.get(key, 0.0) + choice.probability * val
        out = []
        reward = self.reward(state)
        for action, app in self.applicable(state):
            if action.name == "done":
                q = reward - action.cost
            else:
                key = (action.name, app)
                if key not in by_app:
                    continue
                q = reward - action.cost + gamma * by_app[key]
            out.append((action, app, q))
        if not out:
            raise NoApplicableActionError(f"no action applies to {state}")
        return out


def backup(
    states: Iterable[AbstractState],
    ctx: PlannerContext,
    gamma: float,
    v_prev: ValueFunction,
) -> ValueFunction:
    """One synchronous Bellman update over ``states`` (kept in order,
    duplicates included); goal states take exactly the goal reward.  The
    output is not yet normalized."""
    memo: dict[AbstractState, float] = {}
    lookup_memo: dict[AbstractState, float] = {}
    entries = []
    for state in states:
        val = memo.get(state)
        if val is None:
            if ctx.is_goal(state):
                val = ctx.model.goal_reward
            else:
                val = max(
                    q for _, _, q in ctx.q_values(state, v_prev, gamma, lookup_memo)
                )
            memo[state] = val
        entries.append((state, val))
    return ValueFunction(entries)


def normalize(vf: ValueFunction) -> ValueFunction:
    """Exhaustively drop entries subsumed by an equal-valued entry.

    Mutually subsuming equal-valued entries collapse to their first
    representative; afterwards only the subsumption-maximal entries of
    each value class survive.  Ground semantics of ``evaluate`` is
    unchanged and the result is a fixpoint.
    """
    by_value: dict[float, list[int]] = {}
    for i, (_, v) in enumerate(vf.entries):
        by_value.setdefault(v, []).append(i)
    keep: set[int] = set()
    for indices in by_value.values():
        # collapse mutual duplicates, bucketed by the renaming-invariant key
        reps: list[int] = []
        buckets: dict[tuple, list[int]] = {}
        for i in indices:
            state = vf.entries[i][0]
            bucket = buckets.setdefault(state_key(state), [])
            if not any(
                vf.entries[j][0] == state
                or (
                    subsumes(state, vf.entries[j][0]) is not None
                    and subsumes(vf.entries[j][0], state) is not None
                )
                for j in bucket
            ):
                bucket.append(i)
                reps.append(i)
        # a ground positive part can only be subsumed at equal size by an
        # entry sharing it exactly, so index the possible subsumers
        by_positive: dict[FluentTerm, list[int]] = {}
        by_size: dict[int, list[int]] = {}
        lifted: list[int] = []
        for j in reps:
            zj = vf.entries[j][0]
            if zj.positive.is_ground():
                by_positive.setdefault(zj.positive, []).append(j)
                by_size.setdefault(len(zj.positive), []).append(j)
            else:
                lifted.append(j)
        # drop representatives strictly below another representative
        for i in reps:
            zi = vf.entries[i][0]
            if zi.positive.is_ground():
                candidates: list[int] = list(by_positive.get(zi.positive, ()))
                for size, js in by_size.items():
                    if size < len(zi.positive):
                        candidates.extend(js)
                candidates.extend(lifted)
            else:
                candidates = reps
            dominated = False
            for j in candidates:
                if i == j:
                    continue
                zj = vf.entries[j][0]
                if len(zj.positive) > len(zi.positive):
                    continue
                if subsumes(zi, zj) is not None and subsumes(zj, zi) is None:
                    dominated = True
                    break
            if not dominated:
                keep.add(i)
    return ValueFunction(e for i, e in enumerate(vf.entries) if i in keep)


def residual(
    v_new: ValueFunction, v_old: ValueFunction, probe: Iterable[AbstractState]
) -> float:
    """Sup-norm of the value change over the probe states."""
    worst = 0.0
    for state in probe:
        diff = abs(evaluate(v_new, state) - evaluate(v_old, state))
        if diff > worst:
            worst = diff
    return worst


@dataclass(frozen=True)
class Policy:
    """Partial policy: per covered state, the chosen action and the
    applicability it was chosen under."""

    entries: tuple[tuple[AbstractState, ActionSchema, Applicability], ...]
    _table: StateTable = field(compare=False, repr=False, default=None)

    @staticmethod
    def of(entries) -> "Policy":
        entries = tuple(entries)
        table = StateTable()
        for state, action, app in entries:
            table.add(state, (action, app))
        return Policy(entries, table)

    def action_for(
        self, state: AbstractState
    ) -> Optional[tuple[ActionSchema, Applicability]]:
        return self._table.get(state)

    def states(self) -> list[AbstractState]:
        return [s for s, _, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def extract_policy(
    vf: ValueFunction,
    states: Iterable[AbstractState],
    ctx: PlannerContext,
    gamma: float,
) -> Policy:
    """Greedy policy over ``states`` against ``vf``; ties break on action
    name, then the canonical order of the applicability."""
    entries = []
    seen: set[AbstractState] = set()
    for state in states:
        if state in seen:
            continue
        seen.add(state)
        if ctx.is_goal(state):
            app = forward_applicable(state, ctx.done)[0]
            entries.append((state, ctx.done, app))
            continue
        qs = ctx.q_values(state, vf, gamma)
        best = max(q for _, _, q in qs)
        tied = [
            (a, app) for a, app, q in qs if q >= best - 1e-12
        ]
        tied.sort(key=lambda pair: (pair[0].name, pair[1].sort_key()))
        entries.append((state, tied[0][0], tied[0][1]))
    return Policy.of(entries)


def goal_reward_value_function(model: ProblemSpec) -> ValueFunction:
    """The admissible initializer: the goal reward everywhere."""
    return ValueFunction([(UNIVERSAL, model.goal_reward)])


def make_heuristic(
    model: ProblemSpec,
    iterations: int,
    ctx: Optional[PlannerContext] = None,
    config: Optional[SolverConfig] = None,
    sweep_log: Optional[list[SweepStats]] = None,
) -> ValueFunction:
    """An admissible heuristic: the goal-reward initializer improved by
    ``iterations`` dynamic-programming sweeps.

    Each sweep first discovers one more layer of successors from the
    initial state, then backs up every entry produced so far (the raw,
    duplicate-bearing update list) and normalizes.  The goal-reward entry
    for the universal state rides along untouched as the admissible
    default for states the sweeps never reached.
    """
    ctx = ctx or PlannerContext(model)
    config = config or SolverConfig.for_model(model)
    universal_entry = (UNIVERSAL, model.goal_reward)
    if iterations == 0:
        return ValueFunction([universal_entry])
    discovered = StateTable()
    frontier = [ctx.initial_state()]
    for s in frontier:
        discovered.add_if_absent(s)
    v_prev = ValueFunction([universal_entry])
    v_norm: ValueFunction = v_prev
    for sweep in range(1, iterations + 1):
        t0 = time.perf_counter()
        raw: list[AbstractState] = list(discovered)
        new_frontier: list[AbstractState] = []
        for state in frontier:
            for _, _, _, succ in ctx.transitions(state):
                raw.append(succ)
                found = discovered.find(succ)
                if found is None:
                    discovered.add_if_absent(succ)
                    new_frontier.append(succ)
        frontier = new_frontier
        v_raw = backup(raw, ctx, config.gamma, v_prev)
        t1 = time.perf_counter()
        v_norm = normalize(v_raw)
        t2 = time.perf_counter()
        if sweep_log is not None:
            sweep_log.append(
                SweepStats(sweep, len(v_raw), len(v_norm), t1 - t0, t2 - t1)
            )
        v_prev = v_norm
    return ValueFunction(tuple(v_norm.entries) + (universal_entry,))


@dataclass(frozen=True)
class ValueIterationResult:
    value: ValueFunction
    policy: Policy
    residual: float
    sweeps: int
    converged: bool
    state_count: int


def reachable_closure(
    ctx: PlannerContext, max_states: int = CLOSURE_STATE_CAP
) -> list[AbstractState]:
    """Every abstract state reachable from the initial state, goal states
    included (but not expanded)."""
    out: list[AbstractState] = []
    table = StateTable()
    queue = [ctx.initial_state()]
    table.add_if_absent(queue[0])
    out.append(queue[0])
    while queue:
        state = queue.pop()
        for _, _, _, succ in ctx.transitions(state):
            if table.find(succ) is None:
                if len(out) >= max_states:
                    raise UniverseTooLargeError(
                        f"more than {max_states} reachable abstract states"
                    )
                table.add_if_absent(succ)
                out.append(succ)
                queue.append(succ)
    return out


def run_value_iteration(
    model: ProblemSpec,
    config: Optional[SolverConfig] = None,
    ctx: Optional[PlannerContext] = None,
    sweep_log: Optional[list[SweepStats]] = None,
) -> ValueIterationResult:
    """Plain value iteration over the whole reachable abstract space,
    to convergence (the no-search baseline)."""
    ctx = ctx or PlannerContext(model)
    config = config or SolverConfig.for_model(model)
    closure = reachable_closure(ctx)
    v = goal_reward_value_function(model)
    r = float("inf")
    sweeps = 0
    while sweeps < config.max_iterations:
        sweeps += 1
        t0 = time.perf_counter()
        v_raw = backup(closure, ctx, config.gamma, v)
        t1 = time.perf_counter()
        v_new = normalize(v_raw)
        t2 = time.perf_counter()
        if sweep_log is not None:
            sweep_log.append(
                SweepStats(sweeps, len(v_raw), len(v_new), t1 - t0, t2 - t1)
            )
        r = residual(v_new, v, closure)
        v = v_new
        if r <= config.epsilon:
            break
    policy = extract_policy(v, closure, ctx, config.gamma)
    return ValueIterationResult(
        v, policy, r, sweeps, r <= config.epsilon, len(closure)
    )


def decider_from_triples(
    triples: Iterable[tuple[AbstractState, str, tuple]],
) -> Callable:
    """Ground decision rule from (state, action name, parameters) rows.

    The most specific matching entry decides (an entry subsumed by every
    other related match); its parameters are grounded through the
    embedding of the entry's state into the ground state.  States no
    entry matches, 'done' entries, and parameters that stay unbound all
    read as 'done'.
    """
    from .terms import ExtVar, ac1_match

    u1 = ExtVar("U1")
    rows = list(triples)

    def decide(gs: GroundState):
        term = gs.term
        matches = [row for row in rows if satisfies(term, row[0])]
        if not matches:
            return None
        specific = [
            m
            for m in matches
            if not any(
                other is not m
                and subsumes(other[0], m[0]) is not None
                and subsumes(m[0], other[0]) is None
                for other in matches
            )
        ]
        state, name, params = specific[0] if specific else matches[0]
        if name == "done":
            return None
        sols = ac1_match(state.positive, term, ext=u1)
        embed = sols[0] if sols else None
        grounded = []
        for p in params:
            if isinstance(p, Var) and embed is not None:
                p = embed.term(p)
            if not isinstance(p, Const):
                return None
            grounded.append(p)
        return (name, tuple(grounded))

    return decide


def policy_decider(policy: Policy, model: ProblemSpec) -> Callable:
    """Adapt a lifted policy to a ground decision rule for simulation."""
    rows = [
        (state, action.name, app.ground_params(action.params))
        for state, action, app in policy.entries
    ]
    return decider_from_triples(rows)

"""Stochastic action schemata and the lifted successor operator.

A stochastic action is a set of deterministic outcomes under nature's
control, each with a fixed probability.  Applicability of the action to an
abstract state is decided by embedding the positive precondition into the
state's positive part and deriving every negative precondition from the
state's negatives; the successor keeps the unmatched remainder, rewrites
the matched part by the outcome's effects, and updates the negatives by
difference and union.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

from .errors import InconsistentSuccessorError, ValidationError
from .states import AbstractState
from .terms import (
    ExtVar,
    FluentTerm,
    Substitution,
    Term,
    Var,
    ac1_match,
    apply_pattern,
    apply_substitution,
    entails_negative,
    is_instance_of,
    rename_clashes,
    substitution_sort_key,
)

_U1 = ExtVar("U1")

PROBABILITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class NatureChoice:
    """One deterministic outcome of a stochastic action."""

    name: str
    probability: float
    pre: AbstractState
    eff: AbstractState

    def __post_init__(self):
        if not 0.0 < self.probability <= 1.0:
            raise ValidationError(
                f"outcome {self.name}: probability {self.probability} outside (0,1]"
            )

    def rename(self, mapping: dict[Var, Var]) -> "NatureChoice":
        return NatureChoice(
            self.name, self.probability, self.pre.rename(mapping), self.eff.rename(mapping)
        )


@dataclass(frozen=True)
class ActionSchema:
    """A named stochastic action: shared precondition, outcomes, cost."""

    name: str
    params: tuple[Var, ...]
    choices: tuple[NatureChoice, ...]
    cost: float = 0.0

    def __post_init__(self):
        if not self.choices:
            raise ValidationError(f"action {self.name}: no outcomes")
        total = sum(c.probability for c in self.choices)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValidationError(
                f"action {self.name}: outcome probabilities sum to {total}, not 1"
            )
        pre = self.choices[0].pre
        for c in self.choices[1:]:
            if c.pre != pre:
                raise ValidationError(
                    f"action {self.name}: outcomes disagree on the precondition"
                )
        if self.cost < 0:
            raise ValidationError(f"action {self.name}: negative cost {self.cost}")
        scope = set(self.params) | pre.variables()
        for c in self.choices:
            loose = c.eff.positive.variables() - scope
            if loose:
                raise ValidationError(
                    f"action {self.name}/{c.name}: effect variables "
                    f"{sorted(v.name for v in loose)} not bound by the precondition"
                )

    @property
    def precondition(self) -> AbstractState:
        return self.choices[0].pre

    def variables(self) -> set[Var]:
        out = set(self.params)
        for c in self.choices:
            out |= c.pre.variables() | c.eff.variables()
        return out

    def rename(self, mapping: dict[Var, Var]) -> "ActionSchema":
        return ActionSchema(
            self.name,
            tuple(mapping.get(p, p) for p in self.params),
            tuple(c.rename(mapping) for c in self.choices),
            self.cost,
        )


@dataclass(frozen=True)
class Applicability:
    """One way an action applies to a state: the positive embedding, the
    per-negative coverage witnesses, and their merged substitution.

    ``renaming`` records how the schema was standardized apart from the
    state; successor computation replays it on the effects.
    """

    theta: Substitution
    sigmas: tuple[Substitution, ...]
    sigma: Substitution
    renaming: tuple[tuple[Var, Var], ...] = ()

    def sort_key(self) -> tuple:
        return (
            substitution_sort_key(self.theta),
            tuple(substitution_sort_key(s) for s in self.sigmas),
        )

    def ground_params(self, params: tuple[Var, ...]) -> tuple[Term, ...]:
        ren = dict(self.renaming)
        return tuple(self.theta.term(ren.get(p, p)) for p in params)


def _merge_compatible(subs: tuple[Substitution, ...]) -> Optional[Substitution]:
    """Union of variable bindings, or None when two disagree.  Extension
    bindings are kept only where all witnesses agree."""
    var_map: dict[Var, Term] = {}
    for s in subs:
        for v, t in s.var_items:
            if var_map.get(v, t) != t:
                return None
            var_map[v] = t
    ext_map: dict[ExtVar, FluentTerm] = {}
    dropped: set[ExtVar] = set()
    for s in subs:
        for e, ftm in s.ext_items:
            if ext_map.get(e, ftm) != ftm:
                dropped.add(e)
            ext_map[e] = ftm
    for e in dropped:
        del ext_map[e]
    return Substitution.of(var_map, ext_map)


def forward_applicable(state: AbstractState, action: ActionSchema) -> list[Applicability]:
    """Every way ``action`` applies to ``state``, in canonical order.

    The positive precondition with an extension variable must match the
    state's positive part, and each negative precondition must be covered
    by the state's negatives.  Witness combinations whose variable
    bindings conflict are discarded.
    """
    clashes = rename_clashes(action.variables(), state.variables())
    schema = action.rename(clashes) if clashes else action
    pre = schema.precondition
    out: list[Applicability] = []
    renaming = tuple(sorted(clashes.items()))
    for theta in ac1_match(pre.positive, state.positive, ext=_U1):
        witness_sets: list[list[Substitution]] = []
        for np in pre.negatives:
            sols = entails_negative(state.positive, np, state.negatives, theta)
            if not sols:
                witness_sets = []
                break
            witness_sets.append(sols)
        else:
            if not pre.negatives:
                out.append(Applicability(theta, (), Substitution.of(), renaming))
                continue
            for combo in product(*witness_sets):
                merged = _merge_compatible(combo)
                if merged is not None:
                    out.append(Applicability(theta, combo, merged, renaming))
    out.sort(key=Applicability.sort_key)
    return out


def successor(
    state: AbstractState, choice: NatureChoice, app: Applicability
) -> AbstractState:
    """The outcome's successor state under one applicability.

    The new positive part instantiates the effect plus the unmatched
    remainder; the negatives are the state's negatives (under the coverage
    witnesses) minus every instance of a consumed negative precondition,
    plus the instantiated effect negatives.
    """
    ren = dict(app.renaming)
    ch = choice.rename(ren) if ren else choice
    p_new = apply_pattern(ch.eff.positive, _U1, app.theta)
    if p_new.has_duplicate_fluent():
        raise InconsistentSuccessorError(
            f"successor of {state} under {ch.name} repeats a fluent: {p_new}"
        )
    sigma_vars = Substitution(app.sigma.var_items, ())
    consumed = [apply_substitution(n, app.theta) for n in ch.pre.negatives]
    anchored = state.positive.variables() | p_new.variables()
    survivors = [
        n_inst
        for n_inst in (apply_substitution(n, sigma_vars) for n in state.negatives)
        if not any(is_instance_of(n_inst, m, anchored) for m in consumed)
    ]
    added = [apply_substitution(n, app.theta) for n in ch.eff.negatives]
    return AbstractState(p_new, survivors + added)


@dataclass(frozen=True)
class SuccessorEntry:
    action: ActionSchema
    applicability: Applicability
    choice: NatureChoice
    state: AbstractState


def all_successors(
    state: AbstractState, actions: list[ActionSchema]
) -> list[SuccessorEntry]:
    """The cross product of applicable actions, applicabilities, and
    outcomes, each with its successor, in deterministic order."""
    out: list[SuccessorEntry] = []
    for action in sorted(actions, key=lambda a: a.name):
        for app in forward_applicable(state, action):
            for choice in action.choices:
                out.append(
                    SuccessorEntry(action, app, choice, successor(state, choice, app))
                )
    return out
